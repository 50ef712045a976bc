void conv(void *raw)
{
	struct hdr *h = (struct hdr *)raw;
	int len = h->len;
}
