#pragma once

#include "strata/core/raster.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace strata::multiview {

// Per-view viewpoint embeddings e^(i), one row of `width` values per view.
class ViewEmbeddingTable {
public:
    ViewEmbeddingTable() = default;
    // Seeded Gaussian rows scaled by `scale`. Throws ContractError if two rows
    // come out within 1e-6 of each other (L2), or n/width < 1.
    ViewEmbeddingTable(int n, int width, std::uint64_t seed, double scale = 0.1);
    static ViewEmbeddingTable zeros(int n, int width);
    static ViewEmbeddingTable from_rows(std::vector<std::vector<double>> rows);

    int size() const noexcept { return static_cast<int>(rows_.size()); }
    int width() const noexcept { return rows_.empty() ? 0 : static_cast<int>(rows_[0].size()); }
    const std::vector<double>& row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }
    // Table whose row i is this table's row (i + shift) mod n.
    ViewEmbeddingTable rotated(int shift) const;

private:
    std::vector<std::vector<double>> rows_;
};

// features + e^(i) broadcast over every pixel. Throws ContractError when the
// channel count differs from the table width or i is out of range.
RasterGrid inject_view_embedding(const RasterGrid& features, int i, const ViewEmbeddingTable& table);

// count tokens of `dim` values each, row-major.
struct TokenArray {
    int count = 0;
    int dim = 0;
    std::vector<double> data;

    TokenArray() = default;
    TokenArray(int count, int dim, double fill = 0.0)
        : count(count), dim(dim), data(static_cast<std::size_t>(count) * dim, fill) {}
    double* token(int t) noexcept { return data.data() + static_cast<std::size_t>(t) * dim; }
    const double* token(int t) const noexcept { return data.data() + static_cast<std::size_t>(t) * dim; }
};

// Views within circular distance `radius` of i, ascending and distinct.
std::vector<int> view_neighbourhood(int i, int n, int radius = 1);

// Softmax attention of each view's queries over the keys/values of its
// circular neighbourhood, logits scaled by 1/sqrt(d). Normalizers and
// weighted sums use exact summation, so the result is independent of key
// order: rotating the views rotates the output bit for bit, and a
// neighbourhood covering every view reproduces global attention exactly.
// When `weights` is given, (*weights)[i] receives the count x keys
// probability matrix of view i (keys in neighbourhood order).
// Throws ContractError on N = 0, d = 0 or shape mismatch.
std::vector<TokenArray> cross_view_local_attention(std::span<const TokenArray> q, std::span<const TokenArray> k,
                                                   std::span<const TokenArray> v, int radius = 1,
                                                   std::vector<std::vector<double>>* weights = nullptr);

} // namespace strata::multiview
