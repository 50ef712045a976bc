static int base = 4;

int scale(int v)
{
	int r = v * base;
	return r;
}
