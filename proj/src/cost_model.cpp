#include "prunekit/cost_model.hpp"

#include <cstdio>
#include <sstream>

namespace prunekit {

std::int64_t layer_flops(const LayoutEntry& e) {
    switch (e.kind) {
        case LayerKind::Conv:
            return static_cast<std::int64_t>(e.out_h) * e.out_w * e.out_c * e.in_c * e.kernel *
                   e.kernel;
        case LayerKind::Fc:
            return static_cast<std::int64_t>(e.in_c) * e.in_h * e.in_w * e.out_c;
        default:
            return 0;
    }
}

std::int64_t layer_params(const LayoutEntry& e) {
    switch (e.kind) {
        case LayerKind::Conv:
            return static_cast<std::int64_t>(e.out_c) * e.in_c * e.kernel * e.kernel;
        case LayerKind::Fc:
            return static_cast<std::int64_t>(e.in_c) * e.in_h * e.in_w * e.out_c;
        case LayerKind::BatchNorm:
            return 2LL * e.in_c;
        default:
            return 0;
    }
}

std::int64_t layer_activation_bytes(const LayoutEntry& e, int batch) {
    switch (e.kind) {
        case LayerKind::Conv:
        case LayerKind::Relu:
        case LayerKind::MaxPool:
        case LayerKind::Gap:
        case LayerKind::Fc:
            return 4LL * batch * e.out_c * e.out_h * e.out_w;
        default:
            return 0;
    }
}

namespace {

struct SideRow {
    std::string name;
    LayerKind kind;
    std::int64_t flops, params, act;
};

std::vector<SideRow> side_rows(const NetworkSpec& spec, int batch) {
    check(batch >= 1, "cost report batch must be >= 1");
    std::vector<SideRow> rows;
    rows.push_back({"input", LayerKind::Add, 0, 0,
                    4LL * batch * spec.input_c * spec.input_h * spec.input_w});
    for (const LayoutEntry& e : layout(spec))
        rows.push_back({e.name, e.kind, layer_flops(e), layer_params(e),
                        layer_activation_bytes(e, batch)});
    return rows;
}

void accumulate(CostRow& t, const CostRow& r) {
    for (int s = 0; s < 2; ++s) {
        t.flops[s] += r.flops[s];
        t.params[s] += r.params[s];
        t.act_bytes[s] += r.act_bytes[s];
    }
}

std::string pct(std::int64_t pruned, std::int64_t original) {
    if (original == 0) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f",
                  100.0 * static_cast<double>(pruned) / static_cast<double>(original));
    return buf;
}

std::string pct2(std::int64_t pruned, std::int64_t original) {
    if (original == 0) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%",
                  100.0 * static_cast<double>(pruned) / static_cast<double>(original));
    return buf;
}

} // namespace

CostReport cost_report(const NetworkSpec& original, int batch) {
    validate_spec(original);
    CostReport r;
    r.has_pruned = false;
    r.totals.name = "total";
    for (const SideRow& s : side_rows(original, batch)) {
        CostRow row;
        row.name = s.name;
        row.kind = s.kind;
        row.in_original = true;
        row.flops[0] = s.flops;
        row.params[0] = s.params;
        row.act_bytes[0] = s.act;
        accumulate(r.totals, row);
        r.rows.push_back(std::move(row));
    }
    r.totals.in_original = true;
    return r;
}

CostReport cost_report(const NetworkSpec& original, const NetworkSpec& pruned, int batch) {
    validate_spec(original);
    validate_spec(pruned);
    const std::vector<SideRow> orig = side_rows(original, batch);
    const std::vector<SideRow> prun = side_rows(pruned, batch);

    CostReport r;
    r.has_pruned = true;
    r.totals.name = "total";
    std::size_t j = 0;
    auto push_pruned_only = [&](const SideRow& s) {
        CostRow row;
        row.name = s.name;
        row.kind = s.kind;
        row.in_pruned = true;
        row.flops[1] = s.flops;
        row.params[1] = s.params;
        row.act_bytes[1] = s.act;
        accumulate(r.totals, row);
        r.rows.push_back(std::move(row));
    };
    for (const SideRow& o : orig) {
        std::size_t k = j;
        while (k < prun.size() && prun[k].name != o.name) ++k;
        CostRow row;
        row.name = o.name;
        row.kind = o.kind;
        row.in_original = true;
        row.flops[0] = o.flops;
        row.params[0] = o.params;
        row.act_bytes[0] = o.act;
        if (k < prun.size()) {
            for (; j < k; ++j) push_pruned_only(prun[j]);
            row.in_pruned = true;
            row.flops[1] = prun[k].flops;
            row.params[1] = prun[k].params;
            row.act_bytes[1] = prun[k].act;
            j = k + 1;
        }
        accumulate(r.totals, row);
        r.rows.push_back(std::move(row));
    }
    for (; j < prun.size(); ++j) push_pruned_only(prun[j]);
    r.totals.in_original = r.totals.in_pruned = true;
    return r;
}

std::string render_report_csv(const CostReport& r) {
    std::ostringstream os;
    if (!r.has_pruned) {
        os << "layer,kind,flops,params,activation_bytes\n";
        for (const CostRow& row : r.rows)
            os << row.name << "," << (row.name == "input" ? "input" : kind_name(row.kind))
               << "," << row.flops[0] << "," << row.params[0] << "," << row.act_bytes[0] << "\n";
        os << "total,," << r.totals.flops[0] << "," << r.totals.params[0] << ","
           << r.totals.act_bytes[0] << "\n";
        return os.str();
    }
    os << "layer,kind,flops,flops_pruned,flops_pct,params,params_pruned,params_pct,"
          "activation_bytes,activation_bytes_pruned,activation_pct\n";
    auto emit = [&os](const CostRow& row, const std::string& kind) {
        os << row.name << "," << kind << ",";
        if (row.in_original) os << row.flops[0];
        os << ",";
        if (row.in_pruned) os << row.flops[1];
        os << ",";
        if (row.in_original && row.in_pruned) os << pct(row.flops[1], row.flops[0]);
        os << ",";
        if (row.in_original) os << row.params[0];
        os << ",";
        if (row.in_pruned) os << row.params[1];
        os << ",";
        if (row.in_original && row.in_pruned) os << pct(row.params[1], row.params[0]);
        os << ",";
        if (row.in_original) os << row.act_bytes[0];
        os << ",";
        if (row.in_pruned) os << row.act_bytes[1];
        os << ",";
        if (row.in_original && row.in_pruned) os << pct(row.act_bytes[1], row.act_bytes[0]);
        os << "\n";
    };
    for (const CostRow& row : r.rows)
        emit(row, row.name == "input" ? "input" : kind_name(row.kind));
    emit(r.totals, "");
    return os.str();
}

std::string human_count(std::int64_t v) {
    char buf[32];
    if (v >= 1000000000LL)
        std::snprintf(buf, sizeof buf, "%.2fB", v / 1e9);
    else if (v >= 1000000LL)
        std::snprintf(buf, sizeof buf, "%.2fM", v / 1e6);
    else if (v >= 1000LL)
        std::snprintf(buf, sizeof buf, "%.2fK", v / 1e3);
    else
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    return buf;
}

std::string human_bytes(std::int64_t v) {
    char buf[32];
    if (v >= 1048576LL)
        std::snprintf(buf, sizeof buf, "%.2fMB", v / 1048576.0);
    else if (v >= 1024LL)
        std::snprintf(buf, sizeof buf, "%.2fKB", v / 1024.0);
    else
        std::snprintf(buf, sizeof buf, "%lldB", static_cast<long long>(v));
    return buf;
}

std::string render_report_text(const CostReport& r) {
    std::ostringstream os;
    auto line = [&os, &r](const std::string& name, const CostRow& row) {
        char buf[256];
        if (!r.has_pruned) {
            std::snprintf(buf, sizeof buf, "%-14s %10s %10s %12s\n", name.c_str(),
                          human_count(row.flops[0]).c_str(), human_count(row.params[0]).c_str(),
                          human_bytes(row.act_bytes[0]).c_str());
            os << buf;
            return;
        }
        const std::string f0 = row.in_original ? human_count(row.flops[0]) : "--";
        const std::string f1 = row.in_pruned ? human_count(row.flops[1]) : "--";
        const std::string p0 = row.in_original ? human_count(row.params[0]) : "--";
        const std::string p1 = row.in_pruned ? human_count(row.params[1]) : "--";
        const std::string a0 = row.in_original ? human_bytes(row.act_bytes[0]) : "--";
        const std::string a1 = row.in_pruned ? human_bytes(row.act_bytes[1]) : "--";
        const bool both = row.in_original && row.in_pruned;
        std::snprintf(buf, sizeof buf,
                      "%-14s %10s %10s %8s %10s %10s %8s %10s %10s %8s\n", name.c_str(),
                      f0.c_str(), f1.c_str(),
                      both ? pct2(row.flops[1], row.flops[0]).c_str() : "",
                      p0.c_str(), p1.c_str(),
                      both ? pct2(row.params[1], row.params[0]).c_str() : "",
                      a0.c_str(), a1.c_str(),
                      both ? pct2(row.act_bytes[1], row.act_bytes[0]).c_str() : "");
        os << buf;
    };
    if (r.has_pruned)
        os << "layer               flops     pruned        %     params     pruned        %"
              " activation     pruned        %\n";
    else
        os << "layer               flops     params   activation\n";
    for (const CostRow& row : r.rows) line(row.name, row);
    line("total", r.totals);
    return os.str();
}

} // namespace prunekit
