#include "hm/csvio.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>

#include "hm/errors.hpp"

namespace hm {

struct CsvWriter::Impl {
    std::FILE* f = nullptr;
};

CsvWriter::CsvWriter(const std::string& path, std::uint64_t config_hash, std::uint64_t seed)
    : impl_(new Impl) {
    impl_->f = std::fopen(path.c_str(), "wb");
    if (!impl_->f) {
        delete impl_;
        throw std::runtime_error("cannot open output file " + path);
    }
    std::fprintf(impl_->f, "# config_hash=%016" PRIx64 " seed=%" PRIu64 "\n", config_hash, seed);
}

CsvWriter::~CsvWriter() {
    if (impl_->f) std::fclose(impl_->f);
    delete impl_;
}

void CsvWriter::comment(const std::string& line) {
    std::fprintf(impl_->f, "# %s\n", line.c_str());
}

void CsvWriter::header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i)
        std::fprintf(impl_->f, "%s%s", i ? "," : "", cols[i].c_str());
    std::fputc('\n', impl_->f);
}

void CsvWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        std::fprintf(impl_->f, "%s%.17g", i ? "," : "", values[i]);
    std::fputc('\n', impl_->f);
}

void CsvWriter::row_with_id(std::uint64_t id, const std::vector<double>& values) {
    std::fprintf(impl_->f, "%" PRIu64, id);
    for (double v : values) std::fprintf(impl_->f, ",%.17g", v);
    std::fputc('\n', impl_->f);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_ensemble_paths(const std::string& path, const WeightedEnsemble& e,
                          std::uint64_t config_hash, std::uint64_t seed) {
    if (!e.has_paths) throw CompositionError("ensemble has no stored paths to export");
    CsvWriter w(path, config_hash, seed);
    w.header({"path_id", "t", "value"});
    const TimeGrid& g = e.plan->grid();
    for (std::size_t i = 0; i < e.count(); ++i) {
        const SamplePath p = e.path(i);
        for (int j = 0; j < g.n_nodes(); ++j)
            w.row_with_id(i, {g.node(j), p[j]});
    }
}

void write_ensemble_weights(const std::string& path, const WeightedEnsemble& e,
                            std::uint64_t config_hash, std::uint64_t seed) {
    CsvWriter w(path, config_hash, seed);
    w.header({"path_id", "log_weight"});
    for (std::size_t i = 0; i < e.count(); ++i) w.row_with_id(i, {e.log_weights[i]});
}

void write_density(const std::string& path, const DensityEstimate& d, std::uint64_t config_hash,
                   std::uint64_t seed) {
    CsvWriter w(path, config_hash, seed);
    w.comment("mass=" + format_double(d.mass) + " mass_se=" + format_double(d.mass_se) +
              " rel_scale=" + format_double(d.rel_scale));
    w.header({"y", "value", "std_err"});
    for (std::size_t j = 0; j < d.y.size(); ++j) w.row({d.y[j], d.value[j], d.total_se(j)});
}

void write_kernel_table(const std::string& path, const KernelTable& t, std::uint64_t config_hash,
                        std::uint64_t seed) {
    CsvWriter w(path, config_hash, seed);
    w.header({"y", "value", "std_err"});
    for (std::size_t j = 0; j < t.y.size(); ++j) w.row({t.y[j], t.value[j], t.se[j]});
}

} // namespace hm
