void init(struct dev *d, int n)
{
	d->count = n;
	d->buf = kmalloc(n, GFP_KERNEL);
}
