#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hm/ensemble.hpp"
#include "hm/kernels.hpp"

namespace hm {

/// CSV writer with '#' metadata header lines. Numbers are printed with
/// round-trip precision so reruns are byte-comparable.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::uint64_t config_hash, std::uint64_t seed);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void comment(const std::string& line);
    void header(const std::vector<std::string>& cols);
    void row(const std::vector<double>& values);
    void row_with_id(std::uint64_t id, const std::vector<double>& values);

private:
    struct Impl;
    Impl* impl_;
};

std::string format_double(double v);

void write_ensemble_paths(const std::string& path, const WeightedEnsemble& e,
                          std::uint64_t config_hash, std::uint64_t seed);
void write_ensemble_weights(const std::string& path, const WeightedEnsemble& e,
                            std::uint64_t config_hash, std::uint64_t seed);
void write_density(const std::string& path, const DensityEstimate& d, std::uint64_t config_hash,
                   std::uint64_t seed);
void write_kernel_table(const std::string& path, const KernelTable& t, std::uint64_t config_hash,
                        std::uint64_t seed);

} // namespace hm
