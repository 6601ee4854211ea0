package handlers

import (
	"encoding/json"
	"net/http"

	"example.com/shopctl/inventory/report"
	inv "example.com/shopctl/inventory/store"
)

type Server struct {
	st *inv.Store
}

func NewServer() *Server {
	return &Server{st: inv.Seeded("pen", "ink")}
}

func (h *Server) handleGet(w http.ResponseWriter, r *http.Request) {
	item, err := h.st.Get(r.URL.Query().Get("sku"))
	if err != nil {
		http.Error(w, err.Error(), http.StatusNotFound)
		return
	}
	writeJSON(w, item)
}

func (h *Server) handleReport(w http.ResponseWriter, r *http.Request) {
	w.Write([]byte(report.Render(h.st)))
}

func (h *Server) handleLow(w http.ResponseWriter, r *http.Request) {
	writeJSON(w, report.LowStock(h.st, 2))
}

func (h *Server) handleRestock(w http.ResponseWriter, r *http.Request) {
	item, err := h.st.Adjust(r.URL.Query().Get("sku"), 10)
	if err != nil {
		http.Error(w, err.Error(), http.StatusBadRequest)
		return
	}
	writeJSON(w, item)
}

func (h *Server) Routes(mux *http.ServeMux) {
	mux.HandleFunc("/item", h.handleGet)
	mux.HandleFunc("/report", h.handleReport)
	mux.HandleFunc("/low", h.handleLow)
	mux.HandleFunc("/restock", h.handleRestock)
}

func writeJSON(w http.ResponseWriter, v interface{}) {
	w.Header().Set("Content-Type", "application/json")
	json.NewEncoder(w).Encode(v)
}

func Snapshot(h *Server) *inv.Store {
	return inv.Clone(h.st)
}
