package report

import (
	"fmt"
	"strings"

	"example.com/shopctl/inventory/store"
)

type Line struct {
	SKU   string
	Count int
}

func Lines(s *store.Store) []Line {
	var out []Line
	for _, sku := range s.SKUs() {
		item, err := s.Get(sku)
		if err != nil {
			continue
		}
		out = append(out, Line{SKU: item.SKU, Count: item.Count})
	}
	return out
}

func Render(s *store.Store) string {
	var b strings.Builder
	for _, l := range Lines(s) {
		b.WriteString(formatLine(l))
	}
	b.WriteString(footer(s.Total()))
	return b.String()
}

func formatLine(l Line) string {
	return fmt.Sprintf("%-10s %5d\n", l.SKU, l.Count)
}

func footer(total int) string {
	return fmt.Sprintf("total %d\n", total)
}

func LowStock(s *store.Store, below int) []string {
	var low []string
	for _, l := range Lines(s) {
		if l.Count < below {
			low = append(low, l.SKU)
		}
	}
	return low
}
