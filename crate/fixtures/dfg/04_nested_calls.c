void g(int x)
{
	int y = h(k(x), 2);
}
