void drop(struct node *n)
{
	free(n->data);
	n->data = NULL;
	kfree(n);
}
