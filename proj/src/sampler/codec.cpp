#include "strata/sampler/codec.hpp"

#include "strata/core/errors.hpp"

#include <cmath>
#include <numbers>

namespace strata::sampler {

BlockDctCodec::BlockDctCodec(int factor) : f_(factor)
{
    if (factor < 1)
        throw DomainError("BlockDctCodec: factor must be >= 1");
    basis_.resize(static_cast<std::size_t>(f_) * f_);
    for (int u = 0; u < f_; ++u) {
        const double a = u == 0 ? std::sqrt(1.0 / f_) : std::sqrt(2.0 / f_);
        for (int x = 0; x < f_; ++x)
            basis_[u * f_ + x] =
                f_ == 1 ? 1.0 : a * std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * f_));
    }
}

RasterGrid BlockDctCodec::encode(const RasterGrid& image) const
{
    if (image.width() % f_ != 0 || image.height() % f_ != 0)
        throw ContractError("codec: image size not divisible by factor");
    const int C = image.channels();
    const int lw = image.width() / f_;
    const int lh = image.height() / f_;
    const int K = f_ * f_;
    RasterGrid out(lw, lh, C * K, image.gsd() * f_, image.anchor());
    std::vector<double> block(K), tmp(K);
    for (int by = 0; by < lh; ++by)
        for (int bx = 0; bx < lw; ++bx)
            for (int c = 0; c < C; ++c) {
                for (int y = 0; y < f_; ++y)
                    for (int x = 0; x < f_; ++x)
                        block[y * f_ + x] = image(bx * f_ + x, by * f_ + y, c);
                // Rows then columns: tmp[y][u], then coefficient[v][u].
                for (int y = 0; y < f_; ++y)
                    for (int u = 0; u < f_; ++u) {
                        double acc = 0.0;
                        for (int x = 0; x < f_; ++x)
                            acc += basis_[u * f_ + x] * block[y * f_ + x];
                        tmp[y * f_ + u] = acc;
                    }
                for (int v = 0; v < f_; ++v)
                    for (int u = 0; u < f_; ++u) {
                        double acc = 0.0;
                        for (int y = 0; y < f_; ++y)
                            acc += basis_[v * f_ + y] * tmp[y * f_ + u];
                        out(bx, by, (v * f_ + u) * C + c) = acc;
                    }
            }
    return out;
}

RasterGrid BlockDctCodec::decode(const RasterGrid& latent, int image_channels) const
{
    const int C = image_channels;
    const int K = f_ * f_;
    if (C <= 0 || latent.channels() != C * K)
        throw ContractError("codec: latent channel count mismatch");
    RasterGrid out(latent.width() * f_, latent.height() * f_, C, latent.gsd() / f_, latent.anchor());
    std::vector<double> coef(K), tmp(K);
    for (int by = 0; by < latent.height(); ++by)
        for (int bx = 0; bx < latent.width(); ++bx)
            for (int c = 0; c < C; ++c) {
                for (int k = 0; k < K; ++k)
                    coef[k] = latent(bx, by, k * C + c);
                for (int y = 0; y < f_; ++y)
                    for (int u = 0; u < f_; ++u) {
                        double acc = 0.0;
                        for (int v = 0; v < f_; ++v)
                            acc += basis_[v * f_ + y] * coef[v * f_ + u];
                        tmp[y * f_ + u] = acc;
                    }
                for (int y = 0; y < f_; ++y)
                    for (int x = 0; x < f_; ++x) {
                        double acc = 0.0;
                        for (int u = 0; u < f_; ++u)
                            acc += basis_[u * f_ + x] * tmp[y * f_ + u];
                        out(bx * f_ + x, by * f_ + y, c) = acc;
                    }
            }
    return out;
}

std::unique_ptr<LatentCodec> make_codec(const std::string& name, int factor)
{
    if (name == "block_dct")
        return std::make_unique<BlockDctCodec>(factor);
    if (name == "identity")
        return std::make_unique<BlockDctCodec>(1);
    throw RegistryError("unknown codec '" + name + "'");
}

} // namespace strata::sampler
