int get(int *arr, int i)
{
	int v = arr[i];
	return v;
}
