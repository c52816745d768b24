#pragma once

// Trace persistence.
//
// CSV: one file per signal group in a directory (voltages.csv, angles.csv,
// der_p.csv, der_q.csv, der_status.csv, taps.csv, system.csv, events.csv),
// one row per step, one column per item.
//
// Binary ("DSTR", little endian, version 1): a header with counts and
// length-prefixed names, then each signal stored column by column (all steps
// of item 0, then item 1, ...), then the event lists. See docs/formats.md.

#include "dersim/grid_model.hpp"
#include "dersim/simulation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dersim::trace_io {

enum class TraceDetail {
    substations, ///< slack bus and transformer terminals only
    all_buses,
};

TraceDetail parse_detail(const std::string& text);

/// Bus indices written for a detail tier, ascending.
std::vector<std::size_t> selected_buses(const grid::GridModel& grid, TraceDetail detail);

void write_trace_csv(const std::filesystem::path& dir, const dynamics::TraceSet& trace, const grid::GridModel& grid,
                     TraceDetail detail = TraceDetail::all_buses);

struct StoredTrace {
    std::vector<std::string> bus_ids;
    std::vector<std::string> der_ids;
    std::vector<std::string> transformer_ids;
    /// bus columns refer to bus_ids; oltc_transformers index transformer_ids
    dynamics::TraceSet trace;
};

void write_trace_binary(const std::filesystem::path& path, const dynamics::TraceSet& trace,
                        const grid::GridModel& grid, TraceDetail detail = TraceDetail::all_buses);
/// Throws ConfigError for unreadable or malformed files.
StoredTrace read_trace_binary(const std::filesystem::path& path);

} // namespace dersim::trace_io
