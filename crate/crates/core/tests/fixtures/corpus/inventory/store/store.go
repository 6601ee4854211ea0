package store

import (
	"errors"
	"sort"
	"strings"
)

var ErrMissing = errors.New("missing item")

type Item struct {
	SKU   string
	Count int
}

type Store struct {
	items map[string]Item
}

func New() *Store {
	return &Store{items: map[string]Item{}}
}

func normalizeSKU(sku string) string {
	return strings.ToUpper(strings.TrimSpace(sku))
}

func (s *Store) Put(sku string, count int) Item {
	key := normalizeSKU(sku)
	item := Item{SKU: key, Count: count}
	s.items[key] = item
	return item
}

func (s *Store) Get(sku string) (Item, error) {
	item, ok := s.items[normalizeSKU(sku)]
	if !ok {
		return Item{}, ErrMissing
	}
	return item, nil
}

func (s *Store) Adjust(sku string, delta int) (Item, error) {
	item, err := s.Get(sku)
	if err != nil {
		return item, err
	}
	return s.Put(item.SKU, item.Count+delta), nil
}

func (s *Store) Delete(sku string) {
	delete(s.items, normalizeSKU(sku))
}

func (s *Store) SKUs() []string {
	out := make([]string, 0, len(s.items))
	for k := range s.items {
		out = append(out, k)
	}
	sort.Strings(out)
	return out
}

func (s *Store) Total() int {
	total := 0
	for _, sku := range s.SKUs() {
		item, _ := s.Get(sku)
		total += item.Count
	}
	return total
}
