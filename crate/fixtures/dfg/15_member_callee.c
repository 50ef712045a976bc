void cb(struct ops *o, int x)
{
	o->handler(x);
}
