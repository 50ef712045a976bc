void plugin_cleanup(struct plugin *plg)
{
	struct plugin **pp = &g_plugins;

	while (*pp) {
		if (*pp == plg) {
			*pp = plg->next;
			free(plg->name);
			free(plg);
			return;
		}
		pp = &(*pp)->next;
	}
}
