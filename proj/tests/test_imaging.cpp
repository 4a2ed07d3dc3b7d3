#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "aaams/imaging.hpp"

using namespace aaams;

namespace {

std::string data_path(const std::string& name) {
  return std::string(AAAMS_TEST_DATA_DIR) + "/" + name;
}

Image test_image(int w, int h) {
  Image img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& px : img.pixels)
    px = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
          static_cast<std::uint8_t>(byte(rng))};
  return img;
}

}  // namespace

TEST_CASE("lab endpoints") {
  const auto black = rgb_to_lab({0, 0, 0});
  CHECK(black[0] == Catch::Approx(0.0).margin(1e-9));
  CHECK(std::abs(black[1]) < 0.01);
  CHECK(std::abs(black[2]) < 0.01);

  const auto white = rgb_to_lab({255, 255, 255});
  CHECK(white[0] == Catch::Approx(100.0).margin(0.001));
  CHECK(std::abs(white[1]) < 0.01);
  CHECK(std::abs(white[2]) < 0.01);

  // published D65 reference values
  const auto red = rgb_to_lab({255, 0, 0});
  CHECK(red[0] == Catch::Approx(53.2408).margin(0.05));
  CHECK(red[1] == Catch::Approx(80.0925).margin(0.05));
  CHECK(red[2] == Catch::Approx(67.2032).margin(0.05));
  const auto blue = rgb_to_lab({0, 0, 255});
  CHECK(blue[0] == Catch::Approx(32.2970).margin(0.05));
  CHECK(blue[1] == Catch::Approx(79.1875).margin(0.05));
  CHECK(blue[2] == Catch::Approx(-107.8602).margin(0.05));
}

TEST_CASE("lab round trip over the color lattice") {
  for (int r = 0; r < 256; r += 17)
    for (int g = 0; g < 256; g += 17)
      for (int b = 0; b < 256; b += 17) {
        const std::array<std::uint8_t, 3> rgb = {
            static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
            static_cast<std::uint8_t>(b)};
        const auto back = lab_to_rgb(rgb_to_lab(rgb));
        for (int ch = 0; ch < 3; ++ch)
          CHECK(std::abs(static_cast<int>(back[static_cast<size_t>(ch)]) -
                         static_cast<int>(rgb[static_cast<size_t>(ch)])) <= 1);
      }
}

TEST_CASE("image_to_features basics") {
  Image one;
  one.width = one.height = 1;
  one.pixels = {{10, 20, 30}};
  const auto fs1 = image_to_features(one);
  CHECK(fs1.features.size() == 1);
  CHECK(fs1.features.dim() == 5);

  Image two;
  two.width = two.height = 2;
  two.pixels = {{0, 0, 0}, {50, 50, 50}, {100, 100, 100}, {200, 200, 200}};
  const auto fs = image_to_features(two);
  REQUIRE(fs.features.size() == 4);
  CHECK(fs.features.point(0)[3] == 0.0);
  CHECK(fs.features.point(0)[4] == 0.0);
  CHECK(fs.features.point(1)[3] == 0.0);
  CHECK(fs.features.point(1)[4] == 1.0);
  CHECK(fs.features.point(2)[3] == 1.0);
  CHECK(fs.features.point(2)[4] == 0.0);
  CHECK(fs.features.point(3)[3] == 1.0);
  CHECK(fs.features.point(3)[4] == 1.0);
  REQUIRE(fs.features.domain_split().has_value());
  CHECK(fs.features.domain_split()->range_dim == 3);
  CHECK(fs.features.domain_split()->spatial_dim == 2);
}

TEST_CASE("ppm round trip") {
  const Image img = test_image(7, 5);
  const std::string path = data_path("tmp_roundtrip.ppm");
  save_ppm(img, path);
  const Image back = load_image(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  CHECK(back.pixels == img.pixels);
  std::remove(path.c_str());
}

TEST_CASE("png round trip") {
  const Image img = test_image(9, 4);
  const std::string path = data_path("tmp_roundtrip.png");
  save_png_rgb(img, path);
  const Image back = load_image(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  CHECK(back.pixels == img.pixels);
  std::remove(path.c_str());
}

TEST_CASE("label map round trips preserve 16-bit values") {
  std::vector<int> labels(12);
  for (size_t i = 0; i < labels.size(); ++i)
    labels[i] = static_cast<int>(i * 4999 % 65536);
  int w = 0, h = 0;
  const std::string pgm = data_path("tmp_labels.pgm");
  save_label_map_pgm(labels, 4, 3, pgm);
  CHECK(load_label_map(pgm, w, h) == labels);
  CHECK(w == 4);
  CHECK(h == 3);
  const std::string png = data_path("tmp_labels.png");
  save_label_map_png(labels, 4, 3, png);
  CHECK(load_label_map(png, w, h) == labels);
  std::remove(pgm.c_str());
  std::remove(png.c_str());
}

TEST_CASE("segmentation emission") {
  // uniform image -> single label; two-tone -> two labels
  Partition part;
  part.labels = {0, 0, 1, 1};
  Eigen::VectorXd m0(5), m1(5);
  m0 << 50, 10, -10, 0.5, 0.5;
  m1 << 80, -5, 5, 0.5, 1.5;
  part.modes = {m0, m1};
  part.sigmas = {ClusterBandwidth::isotropic(5, DomainSplit{3, 2}, Scales{1, 1}),
                 ClusterBandwidth::isotropic(5, DomainSplit{3, 2}, Scales{1, 1})};
  const std::string lbl = data_path("tmp_seg_labels.pgm");
  const std::string seg = data_path("tmp_seg.ppm");
  emit_segmentation(part, part.modes, 2, 2, lbl, seg);
  int w = 0, h = 0;
  const auto labels = load_label_map(lbl, w, h);
  CHECK(labels == part.labels);
  const Image seg_img = load_image(seg);
  CHECK(seg_img.pixels[0] == seg_img.pixels[1]);
  CHECK(seg_img.pixels[2] == seg_img.pixels[3]);
  CHECK(seg_img.pixels[0] != seg_img.pixels[2]);
  // painted colors match the modes' Lab converted back to RGB
  CHECK(seg_img.pixels[0] == lab_to_rgb({50, 10, -10}));
  std::remove(lbl.c_str());
  std::remove(seg.c_str());
}

TEST_CASE("cluster dump is valid JSON with the documented fields") {
  Partition part;
  part.labels = {0, 0, 0, 0};
  Eigen::VectorXd m0(5);
  m0 << 50, 10, -10, 0.5, 0.5;
  part.modes = {m0};
  part.sigmas = {ClusterBandwidth::isotropic(5, DomainSplit{3, 2}, Scales{2, 3})};
  const std::string path = data_path("tmp_dump.json");
  write_cluster_dump(part, path);
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1);
  CHECK(j[0]["id"] == 0);
  CHECK(j[0]["size"] == 4);
  CHECK(j[0]["mode_lab"].size() == 3);
  CHECK(j[0]["mode_xy"].size() == 2);
  CHECK(j[0]["sigma_r"].size() == 3);
  CHECK(j[0]["sigma_s"].size() == 2);
  CHECK(j[0]["sigma_r"][0][0].get<double>() == Catch::Approx(4.0));
  CHECK(j[0]["sigma_s"][0][0].get<double>() == Catch::Approx(9.0));
  std::remove(path.c_str());
}

TEST_CASE("missing image files raise readable errors") {
  CHECK_THROWS(load_image(data_path("does_not_exist.ppm")));
  int w = 0, h = 0;
  CHECK_THROWS(load_label_map(data_path("does_not_exist.pgm"), w, h));
}

TEST_CASE("uniform and two-tone images cluster to the obvious label counts") {
  Image uniform;
  uniform.width = uniform.height = 8;
  uniform.pixels.assign(64, {120, 140, 160});
  auto run_pipeline = [](const Image& img) {
    auto features = image_to_features(img);
    RunConfig cfg;
    cfg.sigma_base = Scales{std::sqrt(15.0), std::sqrt(16.0)};
    cfg.epsilon = Scales{1.0, 9.0};
    cfg.grid_width = features.width;
    cfg.grid_height = features.height;
    cfg.dense_size_gate = true;
    AgglomerationEngine engine(features.features, cfg);
    const RunResult result = engine.run_to_convergence({});
    PostprocessConfig pp;
    pp.min_size = 1;
    pp.db_threshold = 1.0;
    pp.structured = true;
    pp.grid_width = features.width;
    pp.grid_height = features.height;
    pp.xi = AgglomerationEngine::normalized(cfg, features.features).xi;
    return postprocess(result, features.features, engine.density(), pp);
  };
  CHECK(run_pipeline(uniform).cluster_count() == 1);

  Image two_tone = uniform;
  for (int r = 0; r < 8; ++r)
    for (int c = 4; c < 8; ++c) two_tone.at(r, c) = {240, 80, 60};
  const Partition part = run_pipeline(two_tone);
  CHECK(part.cluster_count() == 2);
  CHECK(static_cast<int>(part.modes.size()) == part.cluster_count());
}
