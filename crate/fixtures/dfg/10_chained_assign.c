void fan(int s)
{
	int a, b;
	a = b = s;
}
