int clamp(int v, int lo)
{
	int r = v < lo ? lo : v;
	return r;
}
