#pragma once

#include "strata/core/raster.hpp"
#include "strata/tiler/plan.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace strata::metrics {

// n feature rows of width D with their mean and unbiased covariance.
struct FeatureSet {
    int n = 0;
    int dim = 0;
    std::vector<double> rows; // row-major n x dim
    std::vector<double> mean;
    std::vector<double> cov;  // row-major dim x dim

    // Throws MetricError for n < 2 or ragged input.
    static FeatureSet from_rows(const std::vector<std::vector<double>>& rows);
    // Moments only (no rows); cov must be symmetric within 1e-9.
    static FeatureSet from_moments(std::vector<double> mean, std::vector<double> cov, int n = 2);
};

// Binary little-endian f32 rows in <stem>.f32 next to a JSON header
// {n, D, data} at `header`.
void write_features(const std::filesystem::path& header, const FeatureSet& f);
FeatureSet read_features(const std::filesystem::path& header);

// |mu_r - mu_g|^2 + Tr(S_r + S_g - 2 sqrtm(S_r^1/2 S_g S_r^1/2)). Eigenvalues
// below -1e-6 raise MetricError; smaller negatives clamp to 0.
double fid(const FeatureSet& r, const FeatureSet& g);

// Stitch lines. A vertical seam at x = c separates columns c-1 and c; a
// horizontal seam at y = c separates rows c-1 and c.
struct SeamSpec {
    std::vector<int> xs;
    std::vector<int> ys;
    bool empty() const noexcept { return xs.empty() && ys.empty(); }
};

// Interior ownership cuts of a window plan (where merged windows meet).
SeamSpec seams_from_plan(const tiler::WindowPlan& plan);

// Mean over seam pixels and channels of the absolute across-seam difference.
// Throws MetricError for an empty spec or a seam outside (0, extent).
double msg(const RasterGrid& r, const SeamSpec& seams);

// Mean absolute neighbour difference over every horizontal and vertical
// pixel pair that does not straddle a seam.
double interior_gradient(const RasterGrid& r, const SeamSpec& seams);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(maxI^2 / MSE) over all pixels, or over mask > 0.5 pixels (mask is
// single-channel, same extent). MSE = 0 returns kPsnrIdentical.
double psnr(const RasterGrid& a, const RasterGrid& b, double max_i, const RasterGrid* mask = nullptr);

struct SsimOptions {
    int window = 8;
    int stride = 1;
    double max_i = 1.0;
};

// Mean SSIM over all windows and channels (uniform weights, population
// moments). With a mask, only windows containing a mask pixel are averaged.
double ssim(const RasterGrid& a, const RasterGrid& b, const SsimOptions& options = {},
            const RasterGrid* mask = nullptr);

// Case and whitespace folding; numeric answers compare as numbers.
std::string normalize_answer(const std::string& s);
bool answers_match(const std::string& prediction, const std::string& label);
double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& labels);

// Lowercased tokens split at whitespace and punctuation.
std::vector<std::string> tokenize(const std::string& text);

struct RougeL {
    int lcs = 0;
    double recall = 0.0;
    double precision = 0.0;
    double f = 0.0;
};

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
RougeL rouge_l(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
               double beta = 1.0);

// Hand-crafted 64-D image descriptor (per-channel intensity histograms plus a
// gradient orientation/magnitude histogram) for self-contained FID runs. Its
// values are not comparable to deep-feature FID.
inline constexpr int kDescriptorDim = 64;
std::vector<double> descriptor(const RasterGrid& image);

} // namespace strata::metrics
