void set(int *arr, int i, int v)
{
	arr[i] = v;
}
