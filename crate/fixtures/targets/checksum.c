unsigned int checksum(const unsigned char *data, size_t len)
{
	unsigned int acc = 0;
	size_t k;

	for (k = 0; k < len; k++)
		acc = (acc << 5) + acc + data[k];
	return acc;
}
