int total(const int *buf, int len)
{
	int i, sum = 0;
	for (i = 0; i < len; i++)
		sum += buf[i];
	return sum;
}
