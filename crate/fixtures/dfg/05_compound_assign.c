void acc(int a)
{
	int t = 0;
	t += a * 2;
}
