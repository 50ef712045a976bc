static int legacy_parse_param(struct fs_context *fc, struct fs_parameter *param)
{
	struct legacy_fs_context *ctx = fc->fs_private;
	unsigned int size = ctx->data_size;
	size_t len = 0;

	len = strlen(param->key);
	if (len > PAGE_SIZE - 2 - size)
		return invalf(fc, "VFS: Legacy: Cumulative options too large");
	ctx->legacy_data = kmalloc(PAGE_SIZE, GFP_KERNEL);
	if (!ctx->legacy_data)
		return -ENOMEM;
	memcpy(ctx->legacy_data + size, param->key, len);
	size += len;
	ctx->data_size = size;
	return 0;
}
