#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace octden;

namespace {

Image shifted(const Image& img, double by) {
  Image out = img;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += by;
  return out;
}

}  // namespace

TEST(Psnr, ClosedForms) {
  const auto ref = oracle::random_image(16, 16, 1);
  EXPECT_FALSE(psnr(ref, ref).has_value());
  EXPECT_NEAR(*psnr(shifted(ref, 0.1), ref), 20.0, 1e-9);
  EXPECT_NEAR(*psnr(shifted(ref, 1.0), ref), 0.0, 1e-9);
  EXPECT_NEAR(*psnr(shifted(ref, 25.5), ref, 255.0), 20.0, 1e-9);
}

TEST(Psnr, DecreasesWithError) {
  const auto ref = oracle::random_image(8, 8, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (double e : {0.001, 0.01, 0.05, 0.2, 0.7}) {
    const double db = *psnr(shifted(ref, e), ref);
    EXPECT_LT(db, prev);
    prev = db;
  }
}

TEST(Psnr, RoiAndErrors) {
  const auto ref = oracle::random_image(4, 4, 3);
  auto test = shifted(ref, 0.1);
  test[0] = 5.0;
  RoiMask roi(16, 1);
  roi[0] = 0;
  EXPECT_NEAR(*psnr(test, ref, 1.0, &roi), 20.0, 1e-9);
  EXPECT_THROW(psnr(test, ref, 0.0), InputError);
  EXPECT_THROW(psnr(Image(4, 5), ref), ShapeError);
  RoiMask empty(16, 0);
  EXPECT_THROW(psnr(test, ref, 1.0, &empty), InputError);
}

TEST(Ssim, SelfIsOne) {
  const auto a = oracle::random_image(24, 20, 4);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantVersusConstant) {
  const SsimConfig cfg;
  const double c1 = cfg.c1();
  EXPECT_NEAR(ssim(Image(16, 16, 0.0), Image(16, 16, 1.0)), c1 / (1.0 + c1), 1e-8);
}

TEST(Ssim, SymmetricAndBounded) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = oracle::random_image(15, 17, s), b = oracle::random_image(15, 17, s + 100);
    const double ab = ssim(a, b), ba = ssim(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
  auto a = oracle::random_image(15, 15, 7);
  Image neg(15, 15);
  for (std::size_t i = 0; i < a.size(); ++i) neg[i] = 1.0 - a[i];
  EXPECT_LT(ssim(a, neg), 0.0);
}

TEST(Ssim, WindowedAgainstDirectSum) {
  // One valid window: the mean SSIM is the single-window formula.
  const auto a = oracle::random_image(11, 11, 8), b = oracle::random_image(11, 11, 9);
  const SsimConfig cfg;
  std::vector<double> w(121);
  double tot = 0.0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) tot += w[y * 11 + x] = std::exp(-((y - 5) * (y - 5) + (x - 5) * (x - 5)) / (2 * 1.5 * 1.5));
  double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
  for (std::size_t i = 0; i < 121; ++i) {
    const double k = w[i] / tot;
    ma += k * a[i];
    mb += k * b[i];
    aa += k * a[i] * a[i];
    bb += k * b[i] * b[i];
    ab += k * a[i] * b[i];
  }
  const double va = aa - ma * ma, vb = bb - mb * mb, cov = ab - ma * mb;
  const double want = ((2 * ma * mb + cfg.c1()) * (2 * cov + cfg.c2())) /
                      ((ma * ma + mb * mb + cfg.c1()) * (va + vb + cfg.c2()));
  EXPECT_NEAR(ssim(a, b, cfg), want, 1e-12);
}

TEST(Ssim, TooSmallRejected) { EXPECT_THROW(ssim(Image(10, 30), Image(10, 30)), InputError); }

TEST(Median, WindowOneIsIdentity) {
  const auto a = oracle::random_image(9, 7, 10);
  EXPECT_EQ(median_filter(a, 1), a);
}

TEST(Median, CenterOfKnownNeighbourhood) {
  Image img(3, 3, std::vector<double>{1, 2, 3, 4, 100, 5, 6, 7, 8});
  EXPECT_EQ(median_filter(img, 3).at(1, 1), 5.0);
}

TEST(Median, MatchesSortOracle) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = oracle::random_image(16, 16, 200 + s);
    for (std::size_t w : {3, 5}) ASSERT_EQ(median_filter(a, w), oracle::median(a, w)) << s << "/" << w;
  }
}

TEST(Median, EvenWindowRejectedAndRangeKept) {
  EXPECT_THROW(median_filter(Image(4, 4), 4), InputError);
  const Image c(6, 6, 0.3);
  EXPECT_EQ(median_filter(c, 5), c);
}

TEST(Nlm, ConstantUnchanged) {
  const Image c(10, 10, 0.42);
  EXPECT_EQ(nlm_filter(c, {1, 2, 0.1}), c);
}

TEST(Nlm, LargeStrengthApproachesWindowMean) {
  const auto a = oracle::random_image(12, 12, 11);
  const auto out = nlm_filter(a, {1, 2, 1e6});
  for (long y = 0; y < 12; ++y)
    for (long x = 0; x < 12; ++x) {
      double m = 0.0;
      for (long dy = -2; dy <= 2; ++dy)
        for (long dx = -2; dx <= 2; ++dx) m += oracle::at_replicate(a, y + dy, x + dx);
      EXPECT_NEAR(out.at(y, x), m / 25.0, 1e-3);
    }
}

TEST(Nlm, MatchesQuadrupleLoopOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = oracle::random_image(12, 12, 300 + s);
    for (const NlmParams p : {NlmParams{1, 2, 0.1}, NlmParams{2, 3, 0.3}}) {
      const auto got = nlm_filter(a, p), want = oracle::nlm(a, p.patch_radius, p.search_radius, p.h);
      for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-6) << s << " px " << i;
    }
  }
}

TEST(Nlm, OutputWithinInputRange) {
  const auto a = oracle::random_image(14, 14, 12);
  const auto [lo, hi] = std::minmax_element(a.pixels().begin(), a.pixels().end());
  const auto out = nlm_filter(a, {1, 3, 0.05});
  for (double v : out.pixels()) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
  EXPECT_THROW(nlm_filter(a, {0, 3, 0.1}), InputError);
  EXPECT_THROW(nlm_filter(a, {1, 3, 0.0}), InputError);
}

TEST(Report, IdentityOracleAndFailures) {
  std::vector<EvalPair> pairs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto clean = oracle::random_image(16, 16, 400 + s);
    pairs.push_back({"img" + std::to_string(s), shifted(clean, 0.05 * static_cast<double>(s + 1)), clean});
  }
  const std::vector<Method> methods{
      {"noisy", [](const Image& x) { return x; }},
      {"perfect", [&](const Image& x) {
         for (const auto& p : pairs)
           if (&p.noisy == &x) return p.clean;
         return x;
       }},
      {"broken", [](const Image&) -> Image { throw InputError("nope"); }},
  };
  const auto rep = evaluate_report(pairs, methods);
  ASSERT_EQ(rep.rows.size(), 9u);
  double mean = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rep.rows[i].psnr_db, *psnr(pairs[i].noisy, pairs[i].clean));
    EXPECT_EQ(rep.rows[i].status, RowStatus::Ok);
    mean += rep.rows[i].psnr_db / 3.0;
    EXPECT_EQ(rep.rows[3 + i].status, RowStatus::Identical);
    EXPECT_EQ(rep.rows[6 + i].status, RowStatus::Failed);
    EXPECT_EQ(rep.rows[6 + i].error, "nope");
  }
  EXPECT_NEAR(rep.find("noisy")->mean_psnr_db, mean, 1e-12);
  EXPECT_TRUE(std::isnan(rep.find("perfect")->mean_psnr_db));
  EXPECT_EQ(rep.find("perfect")->identical_rows, 3u);
  EXPECT_EQ(rep.find("broken")->failed_rows, 3u);
  EXPECT_EQ(rep.find("missing"), nullptr);

  const auto csv = report_csv(rep);
  EXPECT_EQ(csv.rfind("image_id,method,psnr_db,ssim,time_s\n", 0), 0u);
  EXPECT_NE(csv.find("img0,perfect,inf,1.000000,"), std::string::npos);
  EXPECT_NE(csv.find("img2,broken,nan,nan,"), std::string::npos);
  const auto table = report_table(rep);
  EXPECT_NE(table.find("Algorithm"), std::string::npos);
  EXPECT_NE(table.find("broken"), std::string::npos);
}

TEST(Report, BestParameterPicksHighestPsnr) {
  std::vector<EvalPair> pairs{{"a", oracle::random_image(8, 8, 1), oracle::random_image(8, 8, 2)}};
  const std::function<Image(const Image&, const double&)> blend = [&](const Image& x, const double& t) {
    Image o(8, 8);
    for (std::size_t i = 0; i < 64; ++i) o[i] = (1 - t) * x[i] + t * pairs[0].clean[i];
    return o;
  };
  EXPECT_EQ(best_parameter<double>(pairs, {0.1, 0.9, 0.5}, blend), 0.9);
  EXPECT_THROW(evaluate_report({}, {}), InputError);
}
