#include "strata/core/errors.hpp"
#include "strata/metrics/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace strata;
using namespace strata::metrics;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> w)
{
    return {w.begin(), w.end()};
}

// Longest common subsequence by enumerating every subsequence of a.
int lcs_brute(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    int best = 0;
    const unsigned n = static_cast<unsigned>(a.size());
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::size_t j = 0;
        int len = 0;
        bool ok = true;
        for (unsigned i = 0; i < n && ok; ++i) {
            if (!(mask & (1u << i)))
                continue;
            while (j < b.size() && b[j] != a[i])
                ++j;
            if (j == b.size())
                ok = false;
            else {
                ++j;
                ++len;
            }
        }
        if (ok)
            best = std::max(best, len);
    }
    return best;
}

RasterGrid random_image(int w, int h, int c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    RasterGrid r(w, h, c);
    for (double& v : r.data())
        v = u(rng);
    return r;
}

} // namespace

TEST_CASE("fid closed forms")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    std::vector<std::vector<double>> rows(50, std::vector<double>(6));
    for (auto& r : rows)
        for (double& v : r)
            v = n(rng);
    const FeatureSet a = FeatureSet::from_rows(rows);
    CHECK(std::fabs(fid(a, a)) <= 1e-8);

    CHECK(fid(FeatureSet::from_moments({0}, {1}), FeatureSet::from_moments({1}, {1})) == doctest::Approx(1.0));
    CHECK(fid(FeatureSet::from_moments({0, 0}, {1, 0, 0, 4}), FeatureSet::from_moments({0, 0}, {4, 0, 0, 1})) ==
          doctest::Approx(2.0));

    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 5;
        std::vector<double> m1(d), m2(d), c1(d * d, 0.0), c2(d * d, 0.0);
        double want = 0.0;
        for (int k = 0; k < d; ++k) {
            m1[k] = n(rng);
            m2[k] = n(rng);
            c1[k * d + k] = u(rng);
            c2[k * d + k] = u(rng);
            const double ds = std::sqrt(c1[k * d + k]) - std::sqrt(c2[k * d + k]);
            want += (m1[k] - m2[k]) * (m1[k] - m2[k]) + ds * ds;
        }
        const FeatureSet r = FeatureSet::from_moments(m1, c1), g = FeatureSet::from_moments(m2, c2);
        CHECK(std::fabs(fid(r, g) - want) < 1e-6);
        CHECK(std::fabs(fid(r, g) - fid(g, r)) < 1e-8);
    }
    CHECK_THROWS_AS(fid(a, FeatureSet::from_moments({0}, {1})), MetricError);
    CHECK_THROWS_AS(fid(FeatureSet::from_moments({0}, {-1}), FeatureSet::from_moments({0}, {1})), MetricError);
    CHECK_THROWS_AS(FeatureSet::from_rows({{1.0}}), MetricError);
}

TEST_CASE("feature files")
{
    const auto dir = std::filesystem::temp_directory_path() / "strata_test_metrics";
    const FeatureSet a = FeatureSet::from_rows({{1, 2}, {3, 5}, {0.5, -1}});
    write_features(dir / "a.json", a);
    const FeatureSet b = read_features(dir / "a.json");
    CHECK(b.rows == a.rows);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mean seam gradient")
{
    RasterGrid flat(8, 8, 1, 1.0, {}, 0.3);
    CHECK(msg(flat, {{4}, {}}) == 0.0);
    RasterGrid step(8, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 4; x < 8; ++x)
            step(x, y) = 1.0;
    CHECK(msg(step, {{4}, {}}) == 1.0);
    CHECK(interior_gradient(step, {{4}, {}}) == 0.0);
    CHECK_THROWS_AS(msg(step, {}), MetricError);
    CHECK_THROWS_AS(msg(step, {{8}, {}}), MetricError);

    // Null calibration on white noise.
    const RasterGrid noise = random_image(256, 256, 1, 7);
    const SeamSpec s = seams_from_plan(tiler::plan_windows(256, 256, 64));
    CHECK(s.xs.size() == 6);
    const double ratio = msg(noise, s) / interior_gradient(noise, s);
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("psnr")
{
    const RasterGrid a = random_image(10, 10, 3, 1);
    CHECK(psnr(a, a, 1.0) == kPsnrIdentical);
    RasterGrid b(4, 4, 1, 1.0, {}, 10.0), c(4, 4, 1, 1.0, {}, 11.0);
    CHECK(psnr(b, c, 255.0) == doctest::Approx(48.1308).epsilon(1e-5));
    RasterGrid d(2, 2, 1, 1.0, {}, 0.1), z(2, 2, 1);
    CHECK(psnr(d, z, 1.0) == doctest::Approx(20.0));
    RasterGrid mask(4, 4, 1);
    CHECK_THROWS_AS(psnr(b, c, 255.0, &mask), MetricError);
    mask(1, 1) = 1.0;
    CHECK(psnr(b, c, 255.0, &mask) == doctest::Approx(48.1308).epsilon(1e-5));
}

TEST_CASE("ssim")
{
    const RasterGrid a = random_image(16, 12, 3, 2);
    CHECK(std::fabs(ssim(a, a) - 1.0) <= 1e-9);

    const double cval = 0.4, dval = 0.1;
    RasterGrid p(8, 8, 1, 1.0, {}, cval), q(8, 8, 1, 1.0, {}, cval + dval);
    const double c1 = 1e-4, c2 = 9e-4;
    const double want = (2 * cval * (cval + dval) + c1) * c2 / ((cval * cval + (cval + dval) * (cval + dval) + c1) * c2);
    CHECK(ssim(p, q) == doctest::Approx(want).epsilon(1e-12));

    RasterGrid neg = a;
    for (double& v : neg.data())
        v = 1.0 - v;
    CHECK(ssim(a, neg) < 0.0);

    RasterGrid scaled = a, scaled_b = random_image(16, 12, 3, 3), b = scaled_b;
    for (double& v : scaled.data())
        v *= 4.0;
    for (double& v : scaled_b.data())
        v *= 4.0;
    CHECK(ssim(scaled, scaled_b, {8, 1, 4.0}) == doctest::Approx(ssim(a, b)).epsilon(1e-9));
    CHECK_THROWS_AS(ssim(RasterGrid(4, 4, 1), RasterGrid(4, 4, 1)), MetricError);
}

TEST_CASE("accuracy")
{
    CHECK(accuracy({"a", "b"}, {"a", "b"}) == 1.0);
    CHECK(accuracy({"1", "2", "3", "x"}, {"1", "2", "3", "4"}) == 0.75);
    CHECK(answers_match("Region A ", "region a"));
    CHECK(answers_match(" 12.0", "12"));
    CHECK(!answers_match("12", "12 m"));
    CHECK_THROWS_AS(accuracy({"a"}, {}), MetricError);
}

TEST_CASE("rouge-l")
{
    const auto ref = tokenize("the cat sat on the mat");
    const auto cand = tokenize("The cat, on mat.");
    CHECK(ref.size() == 6);
    CHECK(cand.size() == 4);
    const RougeL r = rouge_l(ref, cand);
    CHECK(r.lcs == 4);
    CHECK(r.recall == doctest::Approx(2.0 / 3.0));
    CHECK(r.precision == 1.0);
    CHECK(r.f == 0.8);
    const RougeL same = rouge_l(ref, ref);
    CHECK(same.f == 1.0);
    const RougeL none = rouge_l(words({"a", "b"}), words({"c"}));
    CHECK(none.f == 0.0);
    CHECK_THROWS_AS(rouge_l({}, ref), MetricError);

    // Exhaustive oracle over a 3-letter alphabet, lengths up to 8.
    std::mt19937 rng(12);
    const char* alpha[] = {"x", "y", "z"};
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<std::string> a(1 + rng() % 8), b(1 + rng() % 8);
        for (auto& t : a)
            t = alpha[rng() % 3];
        for (auto& t : b)
            t = alpha[rng() % 3];
        CHECK(lcs_length(a, b) == lcs_brute(a, b));
    }
}

TEST_CASE("descriptor")
{
    const RasterGrid a = random_image(20, 20, 3, 9);
    const auto d = descriptor(a);
    CHECK(d.size() == kDescriptorDim);
    double s = 0.0;
    for (int i = 0; i < 16; ++i)
        s += d[i];
    CHECK(s == doctest::Approx(1.0));
    CHECK(descriptor(a) == d);
}
