int sel(int k, int a, int b)
{
	int r = 0;
	switch (k) {
	case 1:
		r = a;
		break;
	default:
		r = b;
	}
	return r;
}
