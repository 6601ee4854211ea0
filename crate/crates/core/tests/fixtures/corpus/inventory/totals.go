package inventory

import (
	"example.com/shopctl/inventory/store"
)

func GrandTotal(stores ...*store.Store) int {
	total := 0
	for _, s := range stores {
		total += s.Total()
	}
	return total
}

func reportTotal(s *store.Store) int {
	return GrandTotal(s)
}
