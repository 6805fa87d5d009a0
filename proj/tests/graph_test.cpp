#include <doctest.h>

#include <fstream>
#include <sstream>

#include "peddet/commands.hpp"
#include "peddet/runner.hpp"
#include "reference_ops.hpp"

using namespace peddet;

namespace {

std::string reference_config_path() {
  return std::string(PEDDET_SOURCE_DIR) + "/configs/peddet.cfg";
}

int count_kind(const ModelGraph& g, LayerKind kind) {
  int n = 0;
  for (const auto& l : g.layers) n += (l.kind == kind);
  return n;
}

}  // namespace

TEST_CASE("reference config parses to the documented architecture") {
  const ModelGraph g = load_model_config(reference_config_path());
  CHECK(count_kind(g, LayerKind::SepConv) == 10);
  CHECK(count_kind(g, LayerKind::AvgPool) == 4);
  CHECK(count_kind(g, LayerKind::Head) == 1);
  CHECK(g.head_grid_size() == 10);
  CHECK(g.grid_count() == 5);
  CHECK(g.downsample_factor() == 32);
  CHECK(g.shapes[g.head_layer].c == 30);

  // Fusion input: 96 + 224 + 480 channels from the three tap scales.
  const int fusion = g.index.at("fusion");
  CHECK(g.shapes[fusion].c == 800);
  CHECK(g.shapes[g.index.at("tap1")].h == 10);
  CHECK(g.shapes[g.index.at("merge1")].h == 80);
  CHECK(g.shapes[g.index.at("merge2")].h == 40);
  CHECK(g.shapes[g.index.at("merge3")].h == 20);

  const long params = g.param_count();
  CHECK(params >= 150000);
  CHECK(params <= 300000);
}

TEST_CASE("single-layer parameter arithmetic") {
  const ModelGraph g = parse_model_config(
      "image input channels=3 width=8 height=8\n"
      "conv1 sepconv filters=16 kernel=5 inputs=image\n"
      "head head grids=1 inputs=conv1\n");
  long conv1 = 0;
  for (const ParamDesc& d : g.param_descs()) {
    if (d.name.rfind("conv1.", 0) == 0) conv1 += d.size();
  }
  CHECK(conv1 == 3 * 25 + 16 * 3 + 16);  // 139

  // pooling and concatenation layers add nothing
  const ModelGraph g2 = parse_model_config(
      "image input channels=3 width=8 height=8\n"
      "conv1 sepconv filters=16 kernel=5 inputs=image\n"
      "pool avgpool inputs=conv1\n"
      "cat concat inputs=pool,pool\n"
      "head head grids=1 inputs=cat\n");
  long conv1_b = 0;
  for (const ParamDesc& d : g2.param_descs()) {
    if (d.name.rfind("conv1.", 0) == 0) conv1_b += d.size();
  }
  CHECK(conv1_b == conv1);
  CHECK(g2.param_count() ==
        conv1 + (6 * 32 + 6));  // head on 32 concat channels
}

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(parse_model_config(""), "no head layer",
                       ValidationError);
  CHECK_THROWS_AS(parse_model_config("image input channels=3 width=8 height=8\n"
                                     "conv1 sepconv\n"),
                  ValidationError);  // missing inputs
  CHECK_THROWS_AS(parse_model_config("x whatnot\n"), ParseError);
  CHECK_THROWS_AS(parse_model_config("image input width=oops\n"), ParseError);
  // forward reference
  CHECK_THROWS_AS(
      parse_model_config("image input channels=3 width=8 height=8\n"
                         "a sepconv filters=2 kernel=3 inputs=b\n"
                         "b sepconv filters=2 kernel=3 inputs=image\n"
                         "head head grids=1 inputs=b\n"),
      ValidationError);
  // duplicate id
  CHECK_THROWS_AS(
      parse_model_config("image input channels=3 width=8 height=8\n"
                         "a sepconv filters=2 kernel=3 inputs=image\n"
                         "a sepconv filters=2 kernel=3 inputs=image\n"
                         "head head grids=1 inputs=a\n"),
      ValidationError);
  // concat spatial mismatch (4x4 vs 8x8)
  try {
    parse_model_config(
        "image input channels=3 width=8 height=8\n"
        "a sepconv filters=2 kernel=3 stride=2 inputs=image\n"
        "bad concat inputs=a,image\n"
        "head head grids=1 inputs=bad\n");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  // kernel outside {1,3,5}
  CHECK_THROWS_AS(
      parse_model_config("image input channels=3 width=8 height=8\n"
                         "a sepconv filters=2 kernel=7 inputs=image\n"
                         "head head grids=1 inputs=a\n"),
      ValidationError);
  // parse errors carry line numbers
  try {
    parse_model_config("image input channels=3 width=8 height=8\nbroken\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("long connections can be removed in config alone") {
  std::ifstream f(reference_config_path());
  std::stringstream buf;
  buf << f.rdbuf();
  std::string cfg = buf.str();
  // drop the two taps and rewire the fusion to the trunk only
  auto cut = [&cfg](const std::string& from, const std::string& to) {
    const size_t at = cfg.find(from);
    REQUIRE(at != std::string::npos);
    cfg.replace(at, from.size(), to);
  };
  cut("tap1   fuse-tap to=10 inputs=merge1\n", "");
  cut("tap2   fuse-tap to=10 inputs=merge2\n", "");
  cut("fusion concat  inputs=tap1,tap2,pool4\n", "fusion concat  inputs=pool4\n");
  const ModelGraph g = parse_model_config(cfg);
  CHECK(count_kind(g, LayerKind::SepConv) == 10);
  CHECK(g.shapes[g.index.at("fusion")].c == 480);
  CHECK(g.head_grid_size() == 10);
}

TEST_CASE("toy and mini configs validate") {
  const ModelGraph toy = parse_model_config(make_toy_config());
  CHECK(toy.head_grid_size() == 10);
  CHECK(toy.grid_count() == 5);
  CHECK(toy.downsample_factor() == 32);

  const ModelGraph toy5 = parse_model_config(make_toy_config(4, 5, 5));
  CHECK(toy5.head_grid_size() == 5);
  HeadConfig h5 = head_config_for(toy5);
  CHECK(h5.slot_count() == 125);

  const ModelGraph mini = parse_model_config(make_mini_config());
  CHECK(mini.head_grid_size() == 2);
  CHECK(mini.grid_count() == 2);
}

TEST_CASE("forward: head shape, zero image with zero bias gives zero head") {
  const ModelGraph g = parse_model_config(make_mini_config());
  ParamSet<float> params = init_params<float>(g, 3);
  TensorF image(1, 3, 32, 32);  // all zeros
  const TensorF head = graph_forward(g, params, image);
  CHECK(head.c() == 12);
  CHECK(head.h() == 2);
  CHECK(head.w() == 2);
  CHECK(head.array().abs().maxCoeff() == 0.0f);  // linear in the input
}

TEST_CASE("forward: perturbing one pixel reaches the head") {
  const ModelGraph g = parse_model_config(make_mini_config());
  ParamSet<float> params = init_params<float>(g, 4);
  Rng rng(5);
  TensorF image = refops::random_tensor(1, 3, 32, 32, rng, 0.0, 1.0);
  const TensorF base = graph_forward(g, params, image);
  image(0, 1, 16, 16) = image(0, 1, 16, 16) > 0.5f ? 0.0f : 1.0f;
  const TensorF moved = graph_forward(g, params, image);
  CHECK(max_abs_diff(base, moved) > 0.0f);
}

TEST_CASE("forward is pure and rejects wrong image shapes") {
  const ModelGraph g = parse_model_config(make_mini_config());
  ParamSet<float> params = init_params<float>(g, 6);
  Rng rng(8);
  TensorF image = refops::random_tensor(1, 3, 32, 32, rng, 0.0, 1.0);
  TensorF copy = image;
  (void)graph_forward(g, params, image);
  CHECK(max_abs_diff(image, copy) == 0.0f);
  TensorF wrong(1, 3, 16, 16);
  CHECK_THROWS_AS(graph_forward(g, params, wrong), ShapeError);
}

TEST_CASE("missing or misshapen weights are rejected against the config") {
  const ModelGraph g = parse_model_config(make_mini_config());
  ParamSet<float> params = init_params<float>(g, 3);
  check_params_match(g, params);  // must accept its own init

  ParamSet<float> renamed;
  for (auto p : params.params) {
    if (p.name == "conv2.pw") p.name = "conv2.pw_oops";
    renamed.add(std::move(p));
  }
  CHECK_THROWS_AS(check_params_match(g, renamed), ValidationError);

  ParamSet<float> resized;
  for (auto p : params.params) {
    if (p.name == "conv2.pw") {
      p.value = TensorF(p.value.n(), p.value.c() + 1, 1, 1);
    }
    resized.add(std::move(p));
  }
  CHECK_THROWS_AS(check_params_match(g, resized), ValidationError);
}
