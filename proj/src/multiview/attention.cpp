#include "strata/multiview/attention.hpp"

#include "strata/core/errors.hpp"
#include "strata/core/exact_sum.hpp"
#include "strata/core/parallel.hpp"
#include "strata/tiler/noise_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace strata::multiview {

namespace {

constexpr int kQueryBlock = 64;

void check_distinct(const std::vector<std::vector<double>>& rows)
{
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < rows[a].size(); ++c)
                d2 += (rows[a][c] - rows[b][c]) * (rows[a][c] - rows[b][c]);
            if (std::sqrt(d2) <= 1e-6)
                throw ContractError("ViewEmbeddingTable: rows are not distinct");
        }
}

} // namespace

ViewEmbeddingTable::ViewEmbeddingTable(int n, int width, std::uint64_t seed, double scale)
{
    if (n < 1 || width < 1)
        throw ContractError("ViewEmbeddingTable: need n >= 1 and width >= 1");
    const tiler::NoiseField field(seed);
    rows_.assign(n, std::vector<double>(width));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < width; ++c)
            rows_[i][c] = scale * field.draw(0, 0, i, 0, c);
    check_distinct(rows_);
}

ViewEmbeddingTable ViewEmbeddingTable::zeros(int n, int width)
{
    ViewEmbeddingTable t;
    t.rows_.assign(n, std::vector<double>(width, 0.0));
    return t;
}

ViewEmbeddingTable ViewEmbeddingTable::from_rows(std::vector<std::vector<double>> rows)
{
    for (const auto& r : rows)
        if (r.size() != rows.front().size())
            throw ContractError("ViewEmbeddingTable: ragged rows");
    ViewEmbeddingTable t;
    t.rows_ = std::move(rows);
    return t;
}

ViewEmbeddingTable ViewEmbeddingTable::rotated(int shift) const
{
    ViewEmbeddingTable t;
    const int n = size();
    for (int i = 0; i < n; ++i)
        t.rows_.push_back(rows_[((i + shift) % n + n) % n]);
    return t;
}

RasterGrid inject_view_embedding(const RasterGrid& features, int i, const ViewEmbeddingTable& table)
{
    if (features.channels() != table.width())
        throw ContractError("inject_view_embedding: channel count differs from table width");
    if (i < 0 || i >= table.size())
        throw ContractError("inject_view_embedding: view index out of range");
    RasterGrid out = features;
    const auto& e = table.row(i);
    const int c = features.channels();
    auto d = out.data();
    for (std::size_t p = 0; p < d.size(); ++p)
        d[p] += e[p % c];
    return out;
}

std::vector<int> view_neighbourhood(int i, int n, int radius)
{
    std::vector<int> out;
    for (int j = 0; j < n; ++j) {
        const int d = std::abs(j - i);
        if (std::min(d, n - d) <= radius)
            out.push_back(j);
    }
    return out;
}

std::vector<TokenArray> cross_view_local_attention(std::span<const TokenArray> q, std::span<const TokenArray> k,
                                                   std::span<const TokenArray> v, int radius,
                                                   std::vector<std::vector<double>>* weights)
{
    const int n = static_cast<int>(q.size());
    if (n == 0)
        throw ContractError("cross_view_local_attention: no views");
    if (k.size() != q.size() || v.size() != q.size())
        throw ContractError("cross_view_local_attention: Q, K, V view counts differ");
    const int d = q[0].dim, dv = v[0].dim, tq = q[0].count, tk = k[0].count;
    if (d == 0)
        throw ContractError("cross_view_local_attention: zero key width");
    if (radius < 0)
        throw ContractError("cross_view_local_attention: negative radius");
    for (int i = 0; i < n; ++i)
        if (q[i].dim != d || k[i].dim != d || v[i].dim != dv || q[i].count != tq || k[i].count != tk ||
            v[i].count != tk || q[i].data.size() != static_cast<std::size_t>(tq) * d ||
            k[i].data.size() != static_cast<std::size_t>(tk) * d ||
            v[i].data.size() != static_cast<std::size_t>(tk) * dv)
            throw ContractError("cross_view_local_attention: token arrays disagree in shape");

    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<TokenArray> out(n, TokenArray(tq, dv));
    if (weights)
        weights->assign(n, {});
    std::vector<std::vector<int>> hood(n);
    for (int i = 0; i < n; ++i) {
        hood[i] = view_neighbourhood(i, n, radius);
        if (weights)
            (*weights)[i].assign(static_cast<std::size_t>(tq) * hood[i].size() * tk, 0.0);
    }
    const int blocks = (tq + kQueryBlock - 1) / kQueryBlock;
    parallel::parallel_for(static_cast<std::size_t>(n) * blocks, [&](std::size_t job) {
        const int i = static_cast<int>(job / blocks), b = static_cast<int>(job % blocks);
        const auto& nb = hood[i];
        const std::size_t nk = nb.size() * tk;
        std::vector<double> logits(nk), e(nk);
        ExactSum acc;
        for (int t = b * kQueryBlock; t < std::min(tq, (b + 1) * kQueryBlock); ++t) {
            const double* qt = q[i].token(t);
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < nb.size(); ++j)
                for (int s = 0; s < tk; ++s) {
                    const double* ks = k[nb[j]].token(s);
                    double dotv = 0.0;
                    for (int c = 0; c < d; ++c)
                        dotv += qt[c] * ks[c];
                    logits[j * tk + s] = dotv * scale;
                    m = std::max(m, logits[j * tk + s]);
                }
            acc.clear();
            for (std::size_t r = 0; r < nk; ++r) {
                e[r] = std::exp(logits[r] - m);
                acc.add(e[r]);
            }
            const double z = acc.value();
            if (weights)
                for (std::size_t r = 0; r < nk; ++r)
                    (*weights)[i][t * nk + r] = e[r] / z;
            double* o = out[i].token(t);
            for (int c = 0; c < dv; ++c) {
                acc.clear();
                for (std::size_t j = 0; j < nb.size(); ++j)
                    for (int s = 0; s < tk; ++s)
                        acc.add(e[j * tk + s] * v[nb[j]].token(s)[c]);
                o[c] = acc.value() / z;
            }
        }
    });
    return out;
}

} // namespace strata::multiview
