#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "mita/baselines.hpp"
#include "mita/records.hpp"

namespace mita {

namespace {

std::string fixed2(std::optional<double> v) {
    if (!v) {
        return "n/a";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' '); }

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;

    void add(const std::optional<double>& v) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    std::optional<double> value() const { return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt; }
};

bool method_less(const std::string& a, const std::string& b) {
    const int ra = method_rank(a);
    const int rb = method_rank(b);
    return ra != rb ? ra < rb : a < b;
}

std::vector<std::string> sorted_methods(const std::vector<RunRecord>& records) {
    std::set<std::string> names;
    for (const auto& r : records) {
        names.insert(r.method);
    }
    std::vector<std::string> out(names.begin(), names.end());
    std::sort(out.begin(), out.end(), method_less);
    return out;
}

/// Seed- and scenario-averaged error grid of the records accepted by `keep`.
template <class Pred>
ErrorGrid mean_grid(const std::vector<RunRecord>& records, Pred keep) {
    std::map<std::string, std::map<int, Mean>> acc;
    for (const auto& r : records) {
        if (!keep(r)) {
            continue;
        }
        for (const auto& [shift, row] : r.errors.entries()) {
            for (const auto& [severity, e] : row) {
                acc[shift][severity].add(e);
            }
        }
    }
    ErrorGrid grid;
    for (const auto& [shift, row] : acc) {
        for (const auto& [severity, m] : row) {
            grid.set(shift, severity, *m.value());
        }
    }
    return grid;
}

} // namespace

int method_rank(const std::string& method) {
    const auto& methods = all_methods();
    for (std::size_t i = 0; i < methods.size(); ++i) {
        if (to_string(methods[i]) == method) {
            return static_cast<int>(i);
        }
    }
    return static_cast<int>(methods.size());
}

Report report_groups(const std::vector<RunRecord>& records) {
    std::map<std::string, std::vector<const RunRecord*>> by_scenario;
    for (const auto& r : records) {
        by_scenario[r.scenario].push_back(&r);
    }
    std::ostringstream text;
    std::ostringstream csv;
    csv << "scenario,regime,method,seeds,acc_a,acc_b,acc_all\n";
    for (const auto& [scenario, recs] : by_scenario) {
        std::map<std::string, std::array<Mean, 3>> rows;
        std::string regime;
        for (const RunRecord* r : recs) {
            auto& m = rows[r->method];
            m[0].add(r->acc_a);
            m[1].add(r->acc_b);
            m[2].add(r->acc_all);
            regime = r->regime;
        }
        std::vector<std::string> methods;
        for (const auto& [name, _] : rows) {
            methods.push_back(name);
        }
        std::sort(methods.begin(), methods.end(), method_less);

        text << "scenario " << scenario << " (" << regime << ")\n";
        text << pad("method", 14) << pad("seeds", 7) << pad("A", 9) << pad("B", 9) << "All\n";
        for (const auto& name : methods) {
            const auto& m = rows[name];
            const std::size_t seeds = std::max({m[0].n, m[1].n, m[2].n});
            text << pad(name, 14) << pad(std::to_string(seeds), 7) << pad(fixed2(m[0].value()), 9)
                 << pad(fixed2(m[1].value()), 9) << fixed2(m[2].value()) << '\n';
            csv << scenario << ',' << regime << ',' << name << ',' << seeds << ',' << fixed2(m[0].value()) << ','
                << fixed2(m[1].value()) << ',' << fixed2(m[2].value()) << '\n';
        }
        text << '\n';
    }
    return {text.str(), csv.str()};
}

Report report_shifts(const std::vector<RunRecord>& records) {
    std::vector<RunRecord> pure;
    for (const auto& r : records) {
        if (r.regime == "pure") {
            pure.push_back(r);
        }
    }
    std::ostringstream text;
    std::ostringstream csv;
    if (pure.empty()) {
        return {"", ""};
    }
    std::set<std::pair<std::string, int>> columns;
    for (const auto& r : pure) {
        for (const auto& [shift, row] : r.errors.entries()) {
            for (const auto& [severity, e] : row) {
                columns.emplace(shift, severity);
            }
        }
    }
    text << pad("method", 14);
    csv << "method";
    for (const auto& [shift, severity] : columns) {
        const std::string label = shift + "-" + std::to_string(severity);
        text << pad(label, std::max<std::size_t>(9, label.size() + 1));
        csv << ',' << label;
    }
    text << pad("Avg", 9) << "mCE\n";
    csv << ",avg,mce\n";

    for (const auto& method : sorted_methods(pure)) {
        std::set<std::string> fingerprints;
        for (const auto& r : pure) {
            if (r.method == method) {
                fingerprints.insert(r.scenario_fingerprint);
            }
        }
        const ErrorGrid grid = mean_grid(pure, [&](const RunRecord& r) { return r.method == method; });
        const ErrorGrid base = mean_grid(pure, [&](const RunRecord& r) {
            return r.method == "source" && fingerprints.count(r.scenario_fingerprint) > 0;
        });
        std::optional<double> avg;
        std::optional<double> ce;
        if (grid.complete()) {
            avg = average_accuracy(grid);
        }
        try {
            ce = mce(grid, base);
        } catch (const std::exception&) {
            ce = std::nullopt;
        }
        text << pad(method, 14);
        csv << method;
        for (const auto& [shift, severity] : columns) {
            const auto e = grid.get(shift, severity);
            std::optional<double> a;
            if (e) {
                a.emplace(100.0 * (1.0 - e.value()));
            }
            const std::string label = shift + "-" + std::to_string(severity);
            text << pad(fixed2(a), std::max<std::size_t>(9, label.size() + 1));
            csv << ',' << fixed2(a);
        }
        text << pad(fixed2(avg), 9) << fixed2(ce) << '\n';
        csv << ',' << fixed2(avg) << ',' << fixed2(ce) << '\n';
    }
    return {text.str(), csv.str()};
}

Report report(const std::vector<RunRecord>& records) {
    const Report groups = report_groups(records);
    const Report shifts = report_shifts(records);
    Report out;
    out.text = "== accuracy by distribution group ==\n" + groups.text;
    out.csv = groups.csv;
    if (!shifts.text.empty()) {
        out.text += "== pure-regime accuracy by shift ==\n" + shifts.text;
        out.csv += "\n" + shifts.csv;
    }
    return out;
}

Report report_ablation(const std::vector<RunRecord>& records) {
    static const std::set<std::string> kAblation{"source", "model_only", "mita_wo_m", "mita_same", "mita"};
    std::vector<RunRecord> kept;
    for (const auto& r : records) {
        if (kAblation.count(r.method) > 0) {
            kept.push_back(r);
        }
    }
    return report_groups(kept);
}

} // namespace mita
