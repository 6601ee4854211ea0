package store

func Seeded(skus ...string) *Store {
	s := New()
	for i, sku := range skus {
		s.Put(sku, i+1)
	}
	return s
}

func Clone(src *Store) *Store {
	dst := New()
	for _, sku := range src.SKUs() {
		item, _ := src.Get(sku)
		dst.Put(item.SKU, item.Count)
	}
	return dst
}
