static bool table_setup(struct zram *dev, u64 size)
{
	size_t pages, i;

	pages = size >> PAGE_SHIFT;
	dev->table = vzalloc(array_size(pages, sizeof(*dev->table)));
	if (!dev->table)
		return false;

	dev->mem_pool = zs_create_pool(dev->disk->disk_name);
	if (!dev->mem_pool) {
		vfree(dev->table);
		return false;
	}

	if (!huge_class_size)
		huge_class_size = zs_huge_class_size(dev->mem_pool);

	for (i = 0; i < pages; i++)
		spin_lock_init(&dev->table[i].lock);
	return true;
}
