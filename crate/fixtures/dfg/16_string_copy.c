void cp(char *d, const char *s)
{
	size_t len = strlen(s);
	strncpy(d, s, len);
	d[len] = 0;
}
