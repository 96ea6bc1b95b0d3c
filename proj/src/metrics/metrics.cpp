#include "strata/metrics/metrics.hpp"

#include "strata/core/errors.hpp"
#include "strata/io/files.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <numbers>

namespace strata::metrics {

namespace {

void finish_moments(FeatureSet& f)
{
    f.mean.assign(f.dim, 0.0);
    for (int i = 0; i < f.n; ++i)
        for (int d = 0; d < f.dim; ++d)
            f.mean[d] += f.rows[static_cast<std::size_t>(i) * f.dim + d];
    for (double& m : f.mean)
        m /= f.n;
    f.cov.assign(static_cast<std::size_t>(f.dim) * f.dim, 0.0);
    for (int i = 0; i < f.n; ++i) {
        const double* r = &f.rows[static_cast<std::size_t>(i) * f.dim];
        for (int a = 0; a < f.dim; ++a)
            for (int b = a; b < f.dim; ++b)
                f.cov[a * f.dim + b] += (r[a] - f.mean[a]) * (r[b] - f.mean[b]);
    }
    for (int a = 0; a < f.dim; ++a)
        for (int b = a; b < f.dim; ++b) {
            const double v = f.cov[a * f.dim + b] / (f.n - 1);
            f.cov[a * f.dim + b] = v;
            f.cov[b * f.dim + a] = v;
        }
}

using Mat = Eigen::MatrixXd;

Mat as_matrix(const std::vector<double>& v, int d)
{
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            m(i, j) = v[static_cast<std::size_t>(i) * d + j];
    return m;
}

Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& ev, const char* what)
{
    Eigen::VectorXd out = ev;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out[i] < -1e-6)
            throw MetricError(std::string("fid: ") + what + " is not positive semi-definite");
        out[i] = std::max(out[i], 0.0);
    }
    return out;
}

} // namespace

FeatureSet FeatureSet::from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.size() < 2)
        throw MetricError("feature set needs at least 2 rows");
    FeatureSet f;
    f.n = static_cast<int>(rows.size());
    f.dim = static_cast<int>(rows.front().size());
    if (f.dim == 0)
        throw MetricError("feature rows are empty");
    f.rows.reserve(rows.size() * f.dim);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != f.dim)
            throw MetricError("feature rows have different widths");
        f.rows.insert(f.rows.end(), r.begin(), r.end());
    }
    finish_moments(f);
    return f;
}

FeatureSet FeatureSet::from_moments(std::vector<double> mean, std::vector<double> cov, int n)
{
    const int d = static_cast<int>(mean.size());
    if (d == 0 || cov.size() != static_cast<std::size_t>(d) * d)
        throw MetricError("feature moments have inconsistent sizes");
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < a; ++b)
            if (std::fabs(cov[a * d + b] - cov[b * d + a]) > 1e-9)
                throw MetricError("feature covariance is not symmetric");
    FeatureSet f;
    f.n = n;
    f.dim = d;
    f.mean = std::move(mean);
    f.cov = std::move(cov);
    return f;
}

void write_features(const std::filesystem::path& header, const FeatureSet& f)
{
    if (f.rows.size() != static_cast<std::size_t>(f.n) * f.dim)
        throw MetricError("write_features: feature set carries no rows");
    std::filesystem::path data = header;
    data.replace_extension(".f32");
    std::string bytes(f.rows.size() * 4, '\0');
    for (std::size_t i = 0; i < f.rows.size(); ++i) {
        const float v = static_cast<float>(f.rows[i]);
        std::memcpy(&bytes[i * 4], &v, 4);
    }
    io::write_bytes(data, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    nlohmann::ordered_json j;
    j["n"] = f.n;
    j["D"] = f.dim;
    j["data"] = data.filename().string();
    io::write_text(header, j.dump(2) + "\n");
}

FeatureSet read_features(const std::filesystem::path& header)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(header));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad feature header " + header.string() + ": " + e.what());
    }
    const int n = j.at("n").get<int>();
    const int d = j.at("D").get<int>();
    const auto bytes = io::read_bytes(header.parent_path() / j.at("data").get<std::string>());
    if (bytes.size() != static_cast<std::size_t>(n) * d * 4)
        throw IoError("feature data size does not match header " + header.string());
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) {
            float v;
            std::memcpy(&v, &bytes[(static_cast<std::size_t>(i) * d + k) * 4], 4);
            rows[i][k] = v;
        }
    return FeatureSet::from_rows(rows);
}

double fid(const FeatureSet& r, const FeatureSet& g)
{
    if (r.dim != g.dim)
        throw MetricError("fid: feature widths differ");
    const int d = r.dim;
    double gap = 0.0;
    for (int k = 0; k < d; ++k)
        gap += (r.mean[k] - g.mean[k]) * (r.mean[k] - g.mean[k]);

    const Mat sr = as_matrix(r.cov, d);
    const Mat sg = as_matrix(g.cov, d);
    Eigen::SelfAdjointEigenSolver<Mat> er(sr);
    const Eigen::VectorXd lr = clamped_eigenvalues(er.eigenvalues(), "covariance");
    clamped_eigenvalues(Eigen::SelfAdjointEigenSolver<Mat>(sg, Eigen::EigenvaluesOnly).eigenvalues(),
                        "covariance");
    const Mat half = er.eigenvectors() * lr.cwiseSqrt().asDiagonal() * er.eigenvectors().transpose();
    Mat m = half * sg * half;
    m = 0.5 * (m + m.transpose());
    const Eigen::VectorXd lm =
        clamped_eigenvalues(Eigen::SelfAdjointEigenSolver<Mat>(m, Eigen::EigenvaluesOnly).eigenvalues(), "product");
    const double tr_sqrt = lm.cwiseSqrt().sum();
    return gap + sr.trace() + sg.trace() - 2.0 * tr_sqrt;
}

SeamSpec seams_from_plan(const tiler::WindowPlan& plan)
{
    SeamSpec s;
    const auto xc = plan.x_cuts();
    const auto yc = plan.y_cuts();
    s.xs.assign(xc.begin() + 1, xc.end() - 1);
    s.ys.assign(yc.begin() + 1, yc.end() - 1);
    return s;
}

double msg(const RasterGrid& r, const SeamSpec& seams)
{
    if (seams.empty())
        throw MetricError("msg: no seams");
    const int W = r.width(), H = r.height(), C = r.channels();
    double sum = 0.0;
    std::size_t count = 0;
    for (int x : seams.xs) {
        if (x <= 0 || x >= W)
            throw MetricError("msg: vertical seam outside the raster");
        for (int y = 0; y < H; ++y)
            for (int c = 0; c < C; ++c)
                sum += std::fabs(r(x, y, c) - r(x - 1, y, c));
        count += static_cast<std::size_t>(H) * C;
    }
    for (int y : seams.ys) {
        if (y <= 0 || y >= H)
            throw MetricError("msg: horizontal seam outside the raster");
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                sum += std::fabs(r(x, y, c) - r(x, y - 1, c));
        count += static_cast<std::size_t>(W) * C;
    }
    return sum / static_cast<double>(count);
}

double interior_gradient(const RasterGrid& r, const SeamSpec& seams)
{
    const int W = r.width(), H = r.height(), C = r.channels();
    std::vector<char> sx(W + 1, 0), sy(H + 1, 0);
    for (int x : seams.xs)
        if (x > 0 && x < W)
            sx[x] = 1;
    for (int y : seams.ys)
        if (y > 0 && y < H)
            sy[y] = 1;
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                if (x > 0 && !sx[x]) {
                    sum += std::fabs(r(x, y, c) - r(x - 1, y, c));
                    ++count;
                }
                if (y > 0 && !sy[y]) {
                    sum += std::fabs(r(x, y, c) - r(x, y - 1, c));
                    ++count;
                }
            }
    if (count == 0)
        throw MetricError("interior_gradient: no interior pixel pairs");
    return sum / static_cast<double>(count);
}

namespace {

void check_pair(const RasterGrid& a, const RasterGrid& b, const RasterGrid* mask, const char* what)
{
    if (!a.same_shape(b))
        throw MetricError(std::string(what) + ": shapes differ");
    if (mask && (mask->width() != a.width() || mask->height() != a.height() || mask->channels() != 1))
        throw MetricError(std::string(what) + ": mask extent differs");
}

} // namespace

double psnr(const RasterGrid& a, const RasterGrid& b, double max_i, const RasterGrid* mask)
{
    check_pair(a, b, mask, "psnr");
    if (!(max_i > 0.0))
        throw MetricError("psnr: maxI must be positive");
    double se = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            if (mask && !((*mask)(x, y) > 0.5))
                continue;
            for (int c = 0; c < a.channels(); ++c) {
                const double d = a(x, y, c) - b(x, y, c);
                se += d * d;
            }
            n += a.channels();
        }
    if (n == 0)
        throw MetricError("psnr: empty pixel set");
    const double mse = se / static_cast<double>(n);
    if (mse == 0.0)
        return kPsnrIdentical;
    return 10.0 * std::log10(max_i * max_i / mse);
}

double ssim(const RasterGrid& a, const RasterGrid& b, const SsimOptions& o, const RasterGrid* mask)
{
    check_pair(a, b, mask, "ssim");
    const int k = o.window;
    if (k < 1 || o.stride < 1)
        throw MetricError("ssim: bad window spec");
    if (a.width() < k || a.height() < k)
        throw MetricError("ssim: raster smaller than the window");
    const double c1 = (0.01 * o.max_i) * (0.01 * o.max_i);
    const double c2 = (0.03 * o.max_i) * (0.03 * o.max_i);
    const double n = static_cast<double>(k) * k;
    double total = 0.0;
    std::size_t count = 0;
    for (int y0 = 0; y0 + k <= a.height(); y0 += o.stride)
        for (int x0 = 0; x0 + k <= a.width(); x0 += o.stride) {
            if (mask) {
                bool any = false;
                for (int y = y0; y < y0 + k && !any; ++y)
                    for (int x = x0; x < x0 + k && !any; ++x)
                        any = (*mask)(x, y) > 0.5;
                if (!any)
                    continue;
            }
            for (int c = 0; c < a.channels(); ++c) {
                double sa = 0, sb = 0;
                for (int y = y0; y < y0 + k; ++y)
                    for (int x = x0; x < x0 + k; ++x) {
                        sa += a(x, y, c);
                        sb += b(x, y, c);
                    }
                const double ma = sa / n, mb = sb / n;
                double vaa = 0, vbb = 0, vab = 0;
                for (int y = y0; y < y0 + k; ++y)
                    for (int x = x0; x < x0 + k; ++x) {
                        const double da = a(x, y, c) - ma, db = b(x, y, c) - mb;
                        vaa += da * da;
                        vbb += db * db;
                        vab += da * db;
                    }
                vaa /= n;
                vbb /= n;
                vab /= n;
                total += ((2 * ma * mb + c1) * (2 * vab + c2)) / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
                ++count;
            }
        }
    if (count == 0)
        throw MetricError("ssim: no window intersects the mask");
    return total / static_cast<double>(count);
}

std::string normalize_answer(const std::string& s)
{
    std::string out;
    bool space = false;
    for (unsigned char ch : s) {
        if (std::isspace(ch)) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(static_cast<char>(std::tolower(ch)));
    }
    return out;
}

namespace {

std::optional<double> as_number(const std::string& s)
{
    if (s.empty())
        return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v))
            return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

} // namespace

bool answers_match(const std::string& prediction, const std::string& label)
{
    const std::string p = normalize_answer(prediction), l = normalize_answer(label);
    const auto pn = as_number(p), ln = as_number(l);
    if (pn && ln)
        return *pn == *ln;
    return p == l;
}

double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& labels)
{
    if (predictions.size() != labels.size())
        throw MetricError("accuracy: prediction and label counts differ");
    if (labels.empty())
        throw MetricError("accuracy: no answers");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        hit += answers_match(predictions[i], labels[i]) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::vector<std::string> tokenize(const std::string& text)
{
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeL rouge_l(const std::vector<std::string>& reference, const std::vector<std::string>& candidate, double beta)
{
    if (reference.empty() || candidate.empty())
        throw MetricError("rouge_l: empty token sequence");
    RougeL r;
    r.lcs = lcs_length(reference, candidate);
    r.recall = static_cast<double>(r.lcs) / static_cast<double>(reference.size());
    r.precision = static_cast<double>(r.lcs) / static_cast<double>(candidate.size());
    const double b2 = beta * beta;
    if (r.recall + r.precision > 0.0)
        r.f = (1.0 + b2) * r.recall * r.precision / (r.recall + b2 * r.precision);
    return r;
}

std::vector<double> descriptor(const RasterGrid& image)
{
    if (image.empty())
        throw MetricError("descriptor: empty image");
    const int W = image.width(), H = image.height(), C = image.channels();
    std::vector<double> d(kDescriptorDim, 0.0);
    // 3 x 16 intensity bins.
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int k = 0; k < 3; ++k) {
                const double v = std::clamp(image(x, y, std::min(k, C - 1)), 0.0, 1.0);
                d[k * 16 + std::min(15, static_cast<int>(v * 16.0))] += 1.0;
            }
    for (double& v : d)
        v /= static_cast<double>(W) * H;
    // 8 orientations x 2 magnitude bands on luminance differences.
    double gsum = 0.0;
    std::vector<double> g(16, 0.0);
    auto lum = [&](int x, int y) {
        if (C < 3)
            return image(x, y, 0);
        return 0.299 * image(x, y, 0) + 0.587 * image(x, y, 1) + 0.114 * image(x, y, 2);
    };
    for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
            const double gx = lum(x + 1, y) - lum(x, y);
            const double gy = lum(x, y + 1) - lum(x, y);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0)
                continue;
            double ang = std::atan2(gy, gx) + std::numbers::pi;
            int o = static_cast<int>(ang / (2.0 * std::numbers::pi) * 8.0);
            o = std::clamp(o, 0, 7);
            g[o * 2 + (mag > 0.05 ? 1 : 0)] += mag;
            gsum += mag;
        }
    for (int i = 0; i < 16; ++i)
        d[48 + i] = gsum > 0.0 ? g[i] / gsum : 0.0;
    return d;
}

} // namespace strata::metrics
