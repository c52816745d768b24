#include "dersim/trace_io.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

namespace dersim::trace_io {

static_assert(std::endian::native == std::endian::little, "the binary trace writer assumes a little-endian host");

TraceDetail parse_detail(const std::string& text) {
    if (text == "all" || text == "all_buses")
        return TraceDetail::all_buses;
    if (text == "substations")
        return TraceDetail::substations;
    throw ConfigError("unknown trace detail '" + text + "' (expected all or substations)");
}

std::vector<std::size_t> selected_buses(const grid::GridModel& grid, TraceDetail detail) {
    std::vector<std::size_t> out;
    if (detail == TraceDetail::all_buses) {
        for (std::size_t b = 0; b < grid.buses.size(); ++b)
            out.push_back(b);
        return out;
    }
    std::set<std::size_t> s{grid.slack.bus};
    for (const auto& t : grid.transformers) {
        s.insert(t.from);
        s.insert(t.to);
    }
    return {s.begin(), s.end()};
}

namespace {

void check_shape(const dynamics::TraceSet& tr, const grid::GridModel& grid) {
    if (tr.n_bus != grid.buses.size() || tr.n_der != grid.ders.size())
        throw ConfigError("trace does not belong to this grid");
}

std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

} // namespace

void write_trace_csv(const std::filesystem::path& dir, const dynamics::TraceSet& tr, const grid::GridModel& grid,
                     TraceDetail detail) {
    check_shape(tr, grid);
    prepare_dir(dir);
    const auto buses = selected_buses(grid, detail);
    const auto n = tr.steps();
    auto t = [&](std::size_t k) { return fmt::format("{:.4f}", tr.time[k]); };
    auto write = [&](const char* file, std::size_t cols, auto header, auto cell) {
        try {
            auto out = fmt::output_file((dir / file).string());
            out.print("time");
            for (std::size_t c = 0; c < cols; ++c)
                out.print(",{}", header(c));
            out.print("\n");
            for (std::size_t k = 0; k < n; ++k) {
                out.print("{}", t(k));
                for (std::size_t c = 0; c < cols; ++c)
                    out.print(",{}", cell(k, c));
                out.print("\n");
            }
        } catch (const std::system_error& e) {
            throw ConfigError("cannot write " + (dir / file).string() + ": " + e.what());
        }
    };
    auto bus_id = [&](std::size_t c) { return grid.buses[buses[c]].id; };
    auto der_id = [&](std::size_t c) { return grid.ders[c].id; };
    write("voltages.csv", buses.size(), bus_id,
          [&](std::size_t k, std::size_t c) { return fmt::format("{:.9f}", tr.v(k, buses[c])); });
    write("angles.csv", buses.size(), bus_id,
          [&](std::size_t k, std::size_t c) { return fmt::format("{:.9f}", tr.va[k * tr.n_bus + buses[c]]); });
    write("der_p.csv", tr.n_der, der_id, [&](std::size_t k, std::size_t c) { return fmt::format("{:.6f}", tr.p(k, c)); });
    write("der_q.csv", tr.n_der, der_id, [&](std::size_t k, std::size_t c) { return fmt::format("{:.6f}", tr.q(k, c)); });
    write("der_status.csv", tr.n_der, der_id, [&](std::size_t k, std::size_t c) { return tr.on(k, c) ? "1" : "0"; });
    const auto n_oltc = tr.oltc_transformers.size();
    write("taps.csv", n_oltc, [&](std::size_t c) { return grid.transformers[tr.oltc_transformers[c]].id; },
          [&](std::size_t k, std::size_t c) { return std::to_string(tr.tap(k, c)); });
    write("system.csv", 2, [](std::size_t c) { return c == 0 ? "frequency_hz" : "slack_dw"; },
          [&](std::size_t k, std::size_t c) {
              return c == 0 ? fmt::format("{:.9f}", tr.frequency_hz[k]) : fmt::format("{:.6e}", tr.slack_dw[k]);
          });

    try {
        auto out = fmt::output_file((dir / "events.csv").string());
        out.print("time,kind,item,detail\n");
        struct Row {
            Real time;
            int order;
            std::string text;
        };
        std::vector<Row> rows;
        for (const auto& d : tr.deliveries)
            rows.push_back({d.time, 0,
                            fmt::format("{:.4f},signal,{},{} {}", d.time, grid.ders[d.der].id,
                                        attack::to_string(d.signal.kind), d.signal.value)});
        for (const auto& d : tr.disconnects)
            rows.push_back({d.time, 1, fmt::format("{:.4f},disconnect,{},", d.time, grid.ders[d.der].id)});
        for (const auto& e : tr.tap_events)
            rows.push_back({e.time, 2, fmt::format("{:.4f},tap,{},{}", e.time, grid.transformers[e.transformer].id, e.tap)});
        for (const auto& e : tr.trips)
            rows.push_back({e.time, 3, fmt::format("{:.4f},trip,{},{}", e.time, grid.ders[e.der].id,
                                                   protection::to_string(e.cause))});
        if (tr.collapsed)
            rows.push_back({tr.collapse_time, 4, fmt::format("{:.4f},collapse,,{}", tr.collapse_time, tr.collapse_message)});
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return std::tie(a.time, a.order) < std::tie(b.time, b.order); });
        for (const auto& r : rows)
            out.print("{}\n", r.text);
    } catch (const std::system_error& e) {
        throw ConfigError("cannot write " + (dir / "events.csv").string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// binary

namespace {

constexpr char kMagic[4] = {'D', 'S', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_)
            throw ConfigError("cannot write " + path.string());
    }
    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void finish() {
        out_.flush();
        if (!out_)
            throw ConfigError("write failed for " + path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("cannot open " + path.string());
        data_.assign(std::istreambuf_iterator<char>(in), {});
    }
    template <class T>
    T get() {
        T v;
        need(sizeof v);
        std::memcpy(&v, data_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::string str() {
        auto n = get<std::uint32_t>();
        need(n);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    template <class T>
    void column(std::vector<T>& dst, std::size_t n_items, std::size_t n_steps) {
        // stored item-major, held step-major in memory
        dst.assign(n_items * n_steps, T{});
        for (std::size_t i = 0; i < n_items; ++i)
            for (std::size_t k = 0; k < n_steps; ++k)
                dst[k * n_items + i] = get<T>();
    }
    bool at_end() const { return pos_ == data_.size(); }
    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError(fmt::format("{}: malformed trace ({})", path_.string(), why));
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            fail("truncated");
    }
    std::vector<char> data_;
    std::size_t pos_ = 0;
    std::filesystem::path path_;
};

template <class T, class Get>
void put_column(Writer& w, std::size_t n_items, std::size_t n_steps, Get get) {
    for (std::size_t i = 0; i < n_items; ++i)
        for (std::size_t k = 0; k < n_steps; ++k)
            w.put<T>(get(k, i));
}

} // namespace

void write_trace_binary(const std::filesystem::path& path, const dynamics::TraceSet& tr, const grid::GridModel& grid,
                        TraceDetail detail) {
    check_shape(tr, grid);
    if (path.has_parent_path())
        prepare_dir(path.parent_path());
    const auto buses = selected_buses(grid, detail);
    const auto n = tr.steps();
    const auto n_oltc = tr.oltc_transformers.size();
    Writer w(path);
    w.raw(kMagic, 4);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint64_t>(n);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(buses.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.n_der));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.transformers.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(n_oltc));
    for (auto b : buses)
        w.str(grid.buses[b].id);
    for (const auto& d : grid.ders)
        w.str(d.id);
    for (const auto& t : grid.transformers)
        w.str(t.id);
    for (auto k : tr.oltc_transformers)
        w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
    for (auto p : tr.initial_der_p_mw)
        w.put<double>(p);

    for (std::size_t k = 0; k < n; ++k)
        w.put<double>(tr.time[k]);
    put_column<double>(w, buses.size(), n, [&](std::size_t k, std::size_t i) { return tr.v(k, buses[i]); });
    put_column<double>(w, buses.size(), n, [&](std::size_t k, std::size_t i) { return tr.va[k * tr.n_bus + buses[i]]; });
    put_column<double>(w, tr.n_der, n, [&](std::size_t k, std::size_t i) { return tr.p(k, i); });
    put_column<double>(w, tr.n_der, n, [&](std::size_t k, std::size_t i) { return tr.q(k, i); });
    put_column<double>(w, tr.n_der, n, [&](std::size_t k, std::size_t i) { return tr.p_ref(k, i); });
    put_column<std::uint8_t>(w, tr.n_der, n, [&](std::size_t k, std::size_t i) { return tr.der_on[k * tr.n_der + i]; });
    put_column<std::int32_t>(w, n_oltc, n, [&](std::size_t k, std::size_t i) { return tr.tap(k, i); });
    for (std::size_t k = 0; k < n; ++k)
        w.put<double>(tr.slack_dw[k]);
    for (std::size_t k = 0; k < n; ++k)
        w.put<double>(tr.frequency_hz[k]);

    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.trips.size()));
    for (const auto& e : tr.trips) {
        w.put<double>(e.time);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.der));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.cause));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.disconnects.size()));
    for (const auto& e : tr.disconnects) {
        w.put<double>(e.time);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.der));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.tap_events.size()));
    for (const auto& e : tr.tap_events) {
        w.put<double>(e.time);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.transformer));
        w.put<std::int32_t>(e.tap);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tr.deliveries.size()));
    for (const auto& e : tr.deliveries) {
        w.put<double>(e.time);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.der));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.signal.kind));
        w.put<double>(e.signal.value);
    }
    w.put<std::uint8_t>(tr.collapsed ? 1 : 0);
    w.put<double>(tr.collapse_time);
    w.str(tr.collapse_message);
    w.finish();
}

StoredTrace read_trace_binary(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    for (char& c : magic)
        c = r.get<char>();
    if (std::memcmp(magic, kMagic, 4) != 0)
        r.fail("bad magic");
    if (r.get<std::uint32_t>() != kVersion)
        r.fail("unsupported version");
    StoredTrace st;
    auto& tr = st.trace;
    const auto n = static_cast<std::size_t>(r.get<std::uint64_t>());
    tr.n_bus = r.get<std::uint32_t>();
    tr.n_der = r.get<std::uint32_t>();
    const std::size_t n_tr = r.get<std::uint32_t>();
    const std::size_t n_oltc = r.get<std::uint32_t>();
    for (std::size_t i = 0; i < tr.n_bus; ++i)
        st.bus_ids.push_back(r.str());
    for (std::size_t i = 0; i < tr.n_der; ++i)
        st.der_ids.push_back(r.str());
    for (std::size_t i = 0; i < n_tr; ++i)
        st.transformer_ids.push_back(r.str());
    for (std::size_t i = 0; i < n_oltc; ++i) {
        auto k = r.get<std::uint32_t>();
        if (k >= n_tr)
            r.fail("OLTC index out of range");
        tr.oltc_transformers.push_back(k);
    }
    for (std::size_t i = 0; i < tr.n_der; ++i)
        tr.initial_der_p_mw.push_back(r.get<double>());

    tr.time.resize(n);
    for (auto& t : tr.time)
        t = r.get<double>();
    r.column(tr.vm, tr.n_bus, n);
    r.column(tr.va, tr.n_bus, n);
    r.column(tr.der_p, tr.n_der, n);
    r.column(tr.der_q, tr.n_der, n);
    r.column(tr.der_p_ref, tr.n_der, n);
    r.column(tr.der_on, tr.n_der, n);
    std::vector<std::int32_t> taps;
    r.column(taps, n_oltc, n);
    tr.taps.assign(taps.begin(), taps.end());
    tr.slack_dw.resize(n);
    for (auto& v : tr.slack_dw)
        v = r.get<double>();
    tr.frequency_hz.resize(n);
    for (auto& v : tr.frequency_hz)
        v = r.get<double>();

    auto der_index = [&](std::uint32_t i) {
        if (i >= tr.n_der)
            r.fail("DER index out of range");
        return static_cast<std::size_t>(i);
    };
    for (auto c = r.get<std::uint32_t>(); c > 0; --c) {
        dynamics::TripRecord e;
        e.time = r.get<double>();
        e.der = der_index(r.get<std::uint32_t>());
        auto cause = r.get<std::uint8_t>();
        if (cause > static_cast<std::uint8_t>(protection::TripCause::hvrt))
            r.fail("unknown trip cause");
        e.cause = static_cast<protection::TripCause>(cause);
        tr.trips.push_back(e);
    }
    for (auto c = r.get<std::uint32_t>(); c > 0; --c) {
        dynamics::DisconnectRecord e;
        e.time = r.get<double>();
        e.der = der_index(r.get<std::uint32_t>());
        tr.disconnects.push_back(e);
    }
    for (auto c = r.get<std::uint32_t>(); c > 0; --c) {
        dynamics::TapRecord e;
        e.time = r.get<double>();
        e.transformer = r.get<std::uint32_t>();
        if (e.transformer >= n_tr)
            r.fail("transformer index out of range");
        e.tap = r.get<std::int32_t>();
        tr.tap_events.push_back(e);
    }
    for (auto c = r.get<std::uint32_t>(); c > 0; --c) {
        dynamics::DeliveryRecord e;
        e.time = r.get<double>();
        e.der = der_index(r.get<std::uint32_t>());
        auto kind = r.get<std::uint8_t>();
        if (kind > static_cast<std::uint8_t>(attack::SignalKind::disconnect))
            r.fail("unknown signal kind");
        e.signal.kind = static_cast<attack::SignalKind>(kind);
        e.signal.value = r.get<double>();
        tr.deliveries.push_back(e);
    }
    tr.collapsed = r.get<std::uint8_t>() != 0;
    tr.collapse_time = r.get<double>();
    tr.collapse_message = r.str();
    if (!r.at_end())
        r.fail("trailing bytes");
    return st;
}

} // namespace dersim::trace_io
