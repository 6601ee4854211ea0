package main

import (
	"log"
	"net/http"

	"example.com/shopctl/inventory/handlers"
	"example.com/shopctl/inventory/report"
)

func main() {
	srv := handlers.NewServer()
	mux := http.NewServeMux()
	srv.Routes(mux)
	log.Print(report.Render(handlers.Snapshot(srv)))
	go warmup(srv)
	log.Fatal(http.ListenAndServe(":8080", mux))
}

func warmup(srv *handlers.Server) {
	snap := handlers.Snapshot(srv)
	report.LowStock(snap, 1)
	reportTotals(snap)
}
