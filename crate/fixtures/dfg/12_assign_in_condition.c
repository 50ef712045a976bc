int rd(int fd, char *b)
{
	int n;
	if ((n = read(fd, b, 16)) < 0)
		return -1;
	return n;
}
