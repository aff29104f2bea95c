// vegmap command-line tool: thin wrappers over the library operations.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vegmap/pipeline/server.hpp"
#include "vegmap/vegmap.hpp"

namespace fs = std::filesystem;
using namespace vegmap;

namespace {

std::string bytes_view(const Bytes& b) { return std::string(b.begin(), b.end()); }

// Prints "<kind> <id> <path> [<- inputs]" for each written artifact.
void report(std::string_view kind, const std::string& content, const fs::path& out,
            const std::vector<std::string>& inputs = {}) {
  std::string line = fmt::format("{} {} {}", kind, content_id(kind, content), out.string());
  if (!inputs.empty()) {
    line += " <-";
    for (const auto& i : inputs) line += " " + i;
  }
  std::cout << line << "\n";
}

void emit_text(std::string_view kind, const std::string& content, const fs::path& out,
               const std::vector<std::string>& inputs = {}) {
  write_text_file(out, content);
  report(kind, content, out, inputs);
}

void emit_png(std::string_view kind, const Bytes& png, const fs::path& out,
              const std::vector<std::string>& inputs = {}) {
  write_file_bytes(out, png);
  report(kind, bytes_view(png), out, inputs);
}

std::string file_id(std::string_view kind, const fs::path& p) {
  return content_id(kind, read_text_file(p));
}

struct LoadedImage {
  std::string id;
  RgbImage image;
};

LoadedImage load_image(const fs::path& p, const std::string& id_override = "") {
  const auto bytes = read_file_bytes(p);
  return {id_override.empty() ? image_id_for(bytes) : id_override, decode_image(bytes)};
}

ProjectConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return config_from_json(nlohmann::json::parse(read_text_file(path)));
}

std::optional<HueRangeSet> parse_hue(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return HueRangeSet::parse(s);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(',', start), s.size());
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vegmap: tile-based vegetation mapping from field imagery"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config supplying defaults")->check(CLI::ExistingFile);

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "360-bin hue spectrum of masked pixels");
  std::string sp_image, sp_mask, sp_out;
  std::optional<double> sp_sat;
  spectrum->add_option("--image", sp_image)->required()->check(CLI::ExistingFile);
  spectrum->add_option("--mask", sp_mask)->required()->check(CLI::ExistingFile);
  spectrum->add_option("--sat-min", sp_sat);
  spectrum->add_option("--out", sp_out)->required();

  // ranges
  auto* ranges = app.add_subcommand("ranges", "Derive hue ranges covering a spectrum mass");
  std::string rg_spectrum, rg_out;
  double rg_mass = 0.95;
  int rg_max = 2;
  ranges->add_option("--spectrum", rg_spectrum)->required()->check(CLI::ExistingFile);
  ranges->add_option("--mass", rg_mass);
  ranges->add_option("--max-intervals", rg_max);
  ranges->add_option("--out", rg_out)->required();

  // refine
  auto* refine = app.add_subcommand("refine", "Keep mask pixels whose hue is in range");
  std::string rf_image, rf_mask, rf_hue, rf_out;
  std::optional<double> rf_sat;
  bool rf_achromatic = false;
  refine->add_option("--image", rf_image)->required()->check(CLI::ExistingFile);
  refine->add_option("--mask", rf_mask)->required()->check(CLI::ExistingFile);
  refine->add_option("--hue", rf_hue)->required();
  refine->add_option("--sat-min", rf_sat);
  refine->add_flag("--accept-achromatic", rf_achromatic);
  refine->add_option("--out", rf_out)->required();

  // select
  auto* select = app.add_subcommand("select", "Harvest training tiles from a class mask");
  std::string se_image, se_mask, se_class, se_hue, se_out, se_image_id;
  std::optional<int> se_size, se_shifts;
  std::optional<double> se_sth, se_sat;
  bool se_achromatic = false;
  select->add_option("--image", se_image)->required()->check(CLI::ExistingFile);
  select->add_option("--mask", se_mask)->required()->check(CLI::ExistingFile);
  select->add_option("--class", se_class)->required();
  select->add_option("--hue", se_hue, "e.g. 55-125 or 25-55,210-235");
  select->add_option("--size", se_size);
  select->add_option("--sth", se_sth);
  select->add_option("--shifts", se_shifts);
  select->add_option("--sat-min", se_sat);
  select->add_flag("--accept-achromatic", se_achromatic);
  select->add_option("--image-id", se_image_id, "defaults to the image content id");
  select->add_option("--out", se_out)->required();

  // merge
  auto* merge = app.add_subcommand("merge", "Merge manifests, dropping conflicting labels");
  std::vector<std::string> mg_in;
  std::string mg_out;
  merge->add_option("--manifest", mg_in)->required()->check(CLI::ExistingFile);
  merge->add_option("--out", mg_out)->required();

  // embed
  auto* embed = app.add_subcommand("embed", "Baseline 67-D features for manifest tiles");
  std::string em_manifest, em_out;
  std::vector<std::string> em_images;
  embed->add_option("--manifest", em_manifest)->required()->check(CLI::ExistingFile);
  embed->add_option("--image", em_images, "image file, or id=path")->required();
  embed->add_option("--out", em_out)->required();

  // rank
  auto* rank = app.add_subcommand("rank", "ANOVA F ranking of features");
  std::string rk_features, rk_manifest, rk_out;
  rank->add_option("--features", rk_features)->required()->check(CLI::ExistingFile);
  rank->add_option("--manifest", rk_manifest)->required()->check(CLI::ExistingFile);
  rank->add_option("--out", rk_out)->required();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Average-linkage cosine dendrogram");
  std::string cl_features, cl_out;
  cluster->add_option("--features", cl_features)->required()->check(CLI::ExistingFile);
  cluster->add_option("--out", cl_out)->required();

  // neighbors
  auto* neighbors = app.add_subcommand("neighbors", "Cosine nearest neighbours of seed tiles");
  std::string nb_seeds, nb_pool, nb_out, nb_label;
  std::size_t nb_k = 10;
  neighbors->add_option("--seeds", nb_seeds)->required()->check(CLI::ExistingFile);
  neighbors->add_option("--pool", nb_pool)->required()->check(CLI::ExistingFile);
  neighbors->add_option("-k,--k", nb_k);
  neighbors->add_option("--label", nb_label, "write a suggestion manifest with this label");
  neighbors->add_option("--out", nb_out)->required();

  // train
  auto* train = app.add_subcommand("train", "Fit one learner");
  std::string tr_features, tr_manifest, tr_learner = "nn", tr_out, tr_classes;
  std::optional<std::uint64_t> tr_seed;
  train->add_option("--features", tr_features)->required()->check(CLI::ExistingFile);
  train->add_option("--manifest", tr_manifest)->required()->check(CLI::ExistingFile);
  train->add_option("--learner", tr_learner);
  train->add_option("--seed", tr_seed);
  train->add_option("--classes", tr_classes, "comma-separated class order");
  train->add_option("--out", tr_out)->required();

  // cv
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  std::string cv_features, cv_labels = "from-manifest", cv_manifest, cv_learners, cv_out, cv_json,
                           cv_dataset, cv_classes;
  std::optional<int> cv_folds;
  std::optional<std::uint64_t> cv_seed;
  bool cv_timing = false;
  cv->add_option("--features", cv_features)->required()->check(CLI::ExistingFile);
  cv->add_option("--labels", cv_labels, "from-manifest (with --manifest) or a manifest path");
  cv->add_option("--manifest", cv_manifest);
  cv->add_option("--folds", cv_folds);
  cv->add_option("--learners", cv_learners, "e.g. knn,lr,tree,rf,nn,svm");
  cv->add_option("--seed", cv_seed);
  cv->add_option("--dataset", cv_dataset, "dataset column value");
  cv->add_option("--classes", cv_classes);
  cv->add_flag("--timing", cv_timing, "fill the wall-clock columns");
  cv->add_option("--out", cv_out)->required();
  cv->add_option("--json", cv_json, "also write the JSON report with confusion matrices");

  // loo
  auto* loo = app.add_subcommand("loo", "Per-tile validation, each trained on the other N-1 rows");
  std::string lo_features, lo_manifest, lo_learner = "nn", lo_out;
  double lo_fraction = 0.1;
  std::optional<std::uint64_t> lo_seed;
  loo->add_option("--features", lo_features)->required()->check(CLI::ExistingFile);
  loo->add_option("--manifest", lo_manifest)->required()->check(CLI::ExistingFile);
  loo->add_option("--learner", lo_learner);
  loo->add_option("--fraction", lo_fraction);
  loo->add_option("--seed", lo_seed);
  loo->add_option("--out", lo_out)->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Classify a whole image on a tile grid");
  std::string pr_model, pr_image, pr_image_id, pr_out;
  std::optional<int> pr_size;
  predict->add_option("--model", pr_model)->required()->check(CLI::ExistingFile);
  predict->add_option("--image", pr_image)->required()->check(CLI::ExistingFile);
  predict->add_option("--image-id", pr_image_id);
  predict->add_option("--size", pr_size);
  predict->add_option("--out", pr_out)->required();

  // overlay
  auto* overlay = app.add_subcommand("overlay", "Tint predicted cells over the image");
  std::string ov_map, ov_image, ov_classes, ov_palette, ov_out;
  double ov_alpha = 0.5;
  overlay->add_option("--map", ov_map)->required()->check(CLI::ExistingFile);
  overlay->add_option("--image", ov_image)->required()->check(CLI::ExistingFile);
  overlay->add_option("--classes", ov_classes, "comma-separated; default all");
  overlay->add_option("--palette", ov_palette, "comma-separated #rrggbb per class");
  overlay->add_option("--alpha", ov_alpha);
  overlay->add_option("--out", ov_out)->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Per-class cell counts and fractions");
  std::string st_map, st_out;
  stats->add_option("--map", st_map)->required()->check(CLI::ExistingFile);
  stats->add_option("--out", st_out)->required();

  // focus
  auto* focus = app.add_subcommand("focus", "Union of tiles several models assign to a focus class");
  std::string fo_features, fo_focus, fo_out;
  std::vector<std::string> fo_models;
  std::vector<double> fo_thresholds;
  focus->add_option("--features", fo_features)->required()->check(CLI::ExistingFile);
  focus->add_option("--model", fo_models)->required()->check(CLI::ExistingFile);
  focus->add_option("--threshold", fo_thresholds, "one per model (default 0.5)");
  focus->add_option("--focus", fo_focus)->required();
  focus->add_option("--out", fo_out)->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic field scene");
  std::string sy_spec, sy_image, sy_labels, sy_sidecar, sy_spec_out, sy_masks;
  std::optional<std::uint64_t> sy_seed;
  int sy_width = 2048, sy_height = 1536;
  synth->add_option("--spec", sy_spec, "JSON scene spec (default: field preset)");
  synth->add_option("--seed", sy_seed);
  synth->add_option("--width", sy_width);
  synth->add_option("--height", sy_height);
  synth->add_option("--out-image", sy_image)->required();
  synth->add_option("--out-labels", sy_labels);
  synth->add_option("--out-sidecar", sy_sidecar);
  synth->add_option("--write-spec", sy_spec_out);
  synth->add_option("--out-masks", sy_masks, "directory for one <class>.png truth mask per class");

  // init
  auto* init = app.add_subcommand("init", "Create a project store");
  std::string in_root, in_classes;
  init->add_option("--root", in_root)->required();
  init->add_option("--classes", in_classes, "comma-separated class names");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API for a project");
  std::string sv_root, sv_host = "127.0.0.1", sv_static;
  int sv_port = 8080;
  serve->add_option("--root", sv_root)->required();
  serve->add_option("--host", sv_host);
  serve->add_option("--port", sv_port);
  serve->add_option("--static", sv_static, "annotator asset directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load_config(config_path);

    if (*spectrum) {
      const auto img = load_image(sp_image);
      const auto mask = read_mask(sp_mask, "mask");
      const auto s = compute_hue_spectrum(img.image, mask, sp_sat.value_or(cfg.sat_min));
      emit_text("spectrum", spectrum_to_csv(s), sp_out, {img.id});
    } else if (*ranges) {
      const auto s = spectrum_from_csv(read_text_file(rg_spectrum));
      const auto r = derive_hue_ranges(s, rg_mass, rg_max);
      std::cerr << "ranges " << r.to_string() << "\n";
      emit_text("ranges", ranges_to_json(r).dump() + "\n", rg_out, {file_id("spectrum", rg_spectrum)});
    } else if (*refine) {
      const auto img = load_image(rf_image);
      const auto mask = read_mask(rf_mask, "mask");
      const auto out = refine_mask(mask, img.image, HueRangeSet::parse(rf_hue), rf_sat.value_or(cfg.sat_min),
                                   rf_achromatic);
      emit_png("mask", encode_mask(out), rf_out, {img.id});
    } else if (*select) {
      const auto img = load_image(se_image, se_image_id);
      SelectRequest r;
      r.image_id = img.id;
      r.class_name = se_class;
      r.hue = parse_hue(se_hue);
      r.size = se_size.value_or(cfg.size);
      r.sth = se_sth.value_or(cfg.sth);
      r.shifts = se_shifts.value_or(cfg.shifts);
      r.sat_min = se_sat.value_or(cfg.sat_min);
      r.accept_achromatic = se_achromatic;
      const auto manifest = run_select(img.image, read_mask(se_mask, se_class), r);
      std::cerr << manifest.size() << " tiles selected\n";
      emit_text("man", manifest_to_jsonl(manifest), se_out, {img.id});
    } else if (*merge) {
      std::vector<TileManifest> parts;
      std::vector<std::string> inputs;
      for (const auto& p : mg_in) {
        parts.push_back(manifest_from_jsonl(read_text_file(p)));
        inputs.push_back(file_id("man", p));
      }
      std::vector<TileSpec> conflicts;
      const auto merged = merge_manifests(parts, &conflicts);
      for (const auto& c : conflicts) std::cerr << "conflicting labels, dropped " << c.to_string() << "\n";
      emit_text("man", manifest_to_jsonl(merged), mg_out, inputs);
    } else if (*embed) {
      std::map<std::string, RgbImage> images;
      std::vector<std::string> inputs{file_id("man", em_manifest)};
      for (const auto& spec : em_images) {
        const auto eq = spec.find('=');
        auto img = eq == std::string::npos ? load_image(spec) : load_image(spec.substr(eq + 1), spec.substr(0, eq));
        inputs.push_back(img.id);
        images.emplace(img.id, std::move(img.image));
      }
      const auto manifest = manifest_from_jsonl(read_text_file(em_manifest));
      const auto features = run_embed(manifest, [&](const std::string& id) -> const RgbImage& {
        auto it = images.find(id);
        require(it != images.end(), ErrorCode::not_found, "manifest references an image not given", id);
        return it->second;
      });
      emit_text("feat", feature_matrix_to_csv(features), em_out, inputs);
    } else if (*rank) {
      const auto features = feature_matrix_from_csv(read_text_file(rk_features));
      const auto data = dataset_from_manifest(features, manifest_from_jsonl(read_text_file(rk_manifest)));
      const auto ranked = rank_features(data.matrix, data.labels);
      std::string csv = "rank,feature,f_score\n";
      for (std::size_t i = 0; i < ranked.order.size(); ++i) {
        const auto f = ranked.order[i];
        csv += fmt::format("{},f{},{}\n", i + 1, f, ranked.scores[f]);
      }
      emit_text("rank", csv, rk_out, {file_id("feat", rk_features), file_id("man", rk_manifest)});
    } else if (*cluster) {
      const auto features = feature_matrix_from_csv(read_text_file(cl_features));
      emit_text("dendrogram", hclust(features).to_json().dump() + "\n", cl_out, {file_id("feat", cl_features)});
    } else if (*neighbors) {
      const auto seeds = feature_matrix_from_csv(read_text_file(nb_seeds));
      const auto pool = feature_matrix_from_csv(read_text_file(nb_pool));
      const auto hits = nearest_neighbors(seeds, pool, nb_k);
      const std::vector<std::string> inputs{file_id("feat", nb_seeds), file_id("feat", nb_pool)};
      if (nb_label.empty()) {
        emit_text("neighbors", neighbors_to_jsonl(hits, seeds), nb_out, inputs);
      } else {
        emit_text("man", manifest_to_jsonl(suggestions_from_neighbors(hits, nb_label)), nb_out, inputs);
      }
    } else if (*train) {
      TrainRequest r{learner_from_string(tr_learner), tr_seed.value_or(cfg.seed), split_list(tr_classes)};
      const auto model = run_train(feature_matrix_from_csv(read_text_file(tr_features)),
                                   manifest_from_jsonl(read_text_file(tr_manifest)), r);
      if (const auto d = model.diagnostics(); !d.empty()) std::cerr << "warning: " << d << "\n";
      emit_text("model", model_artifact(model), tr_out,
                {file_id("feat", tr_features), file_id("man", tr_manifest)});
    } else if (*cv) {
      const std::string manifest_path = cv_labels == "from-manifest" ? cv_manifest : cv_labels;
      require(!manifest_path.empty(), ErrorCode::invalid_argument,
              "--labels from-manifest needs --manifest <path>");
      CvRequest r;
      r.learners = cv_learners.empty() ? cfg.learners : parse_learner_list(cv_learners);
      r.folds = cv_folds.value_or(cfg.folds);
      r.seed = cv_seed.value_or(cfg.seed);
      r.dataset = cv_dataset;
      r.timing = cv_timing;
      r.classes = split_list(cv_classes);
      const auto out = run_cv(feature_matrix_from_csv(read_text_file(cv_features)),
                              manifest_from_jsonl(read_text_file(manifest_path)), r);
      for (const auto& row : out.report.rows) {
        if (!row.error.empty()) std::cerr << display_name(row.learner) << " failed: " << row.error << "\n";
        if (!row.diagnostics.empty()) std::cerr << "warning: " << row.diagnostics << "\n";
      }
      const std::vector<std::string> inputs{file_id("feat", cv_features), file_id("man", manifest_path)};
      emit_text("cv", out.csv, cv_out, inputs);
      if (!cv_json.empty()) emit_text("cv", out.json, cv_json, inputs);
    } else if (*loo) {
      const auto features = feature_matrix_from_csv(read_text_file(lo_features));
      const auto data = dataset_from_manifest(features, manifest_from_jsonl(read_text_file(lo_manifest)));
      const auto seed = lo_seed.value_or(cfg.seed);
      const auto records = loo_validate(LearnerConfig::defaults(learner_from_string(lo_learner), seed), data,
                                        lo_fraction, seed);
      std::size_t correct = 0;
      for (const auto& r : records) correct += r.actual == r.predicted;
      std::cerr << fmt::format("{} of {} tiles correct\n", correct, records.size());
      emit_text("loo", loo_records_to_jsonl(records, data.class_list), lo_out,
                {file_id("feat", lo_features), file_id("man", lo_manifest)});
    } else if (*predict) {
      const auto model = model_from_json(nlohmann::json::parse(read_text_file(pr_model)));
      const auto img = load_image(pr_image, pr_image_id);
      const auto map = run_predict(model, img.image, pr_size.value_or(cfg.size), img.id);
      emit_text("map", map_artifact(map), pr_out, {file_id("model", pr_model), img.id});
    } else if (*overlay) {
      const auto map = map_from_json(nlohmann::json::parse(read_text_file(ov_map)));
      const auto img = load_image(ov_image);
      std::vector<Rgb> palette = default_palette(map.class_list.size());
      if (!ov_palette.empty()) {
        palette.clear();
        for (const auto& c : split_list(ov_palette)) palette.push_back(parse_hex_color(c));
      }
      const auto classes = ov_classes.empty() ? map.class_list : split_list(ov_classes);
      emit_png("overlay", encode_png(render_overlay(map, img.image, classes, palette, ov_alpha)), ov_out,
               {file_id("map", ov_map), img.id});
    } else if (*stats) {
      const auto map = map_from_json(nlohmann::json::parse(read_text_file(st_map)));
      emit_text("stats", class_area_csv(class_area_stats(map)), st_out, {file_id("map", st_map)});
    } else if (*focus) {
      const auto features = feature_matrix_from_csv(read_text_file(fo_features));
      std::vector<Model> models;
      std::vector<std::string> inputs{file_id("feat", fo_features)};
      for (const auto& p : fo_models) {
        models.push_back(model_from_json(nlohmann::json::parse(read_text_file(p))));
        inputs.push_back(file_id("model", p));
      }
      if (fo_thresholds.empty()) fo_thresholds.assign(models.size(), 0.5);
      const auto f = focus_coverage(models, features, fo_focus, fo_thresholds);
      std::cerr << fmt::format("{} of {} tiles, fraction {:.4f}\n", f.union_rows.size(), f.total, f.fraction);
      emit_text("focus", focus_coverage_to_json(f, models, fo_thresholds, features).dump(2) + "\n", fo_out,
                inputs);
    } else if (*synth) {
      SceneSpec spec = sy_spec.empty() ? field_preset(sy_seed.value_or(cfg.seed), sy_width, sy_height)
                                       : scene_spec_from_json(nlohmann::json::parse(read_text_file(sy_spec)));
      if (sy_seed) spec.seed = *sy_seed;
      const auto scene = generate_scene(spec);
      const auto png = encode_png(scene.image);
      emit_png("img", png, sy_image);
      std::cout << "image id " << image_id_for(png) << "\n";
      if (!sy_labels.empty()) emit_png("labels", encode_png(scene.truth.labels), sy_labels);
      if (!sy_sidecar.empty()) emit_text("truth", truth_sidecar(scene.truth, spec.seed).dump(2) + "\n", sy_sidecar);
      if (!sy_spec_out.empty()) emit_text("scene", scene_spec_to_json(spec).dump(2) + "\n", sy_spec_out);
      if (!sy_masks.empty()) {
        std::filesystem::create_directories(sy_masks);
        for (std::size_t k = 0; k < scene.truth.class_list.size(); ++k) {
          const auto path = std::filesystem::path(sy_masks) / (scene.truth.class_list[k] + ".png");
          emit_png("mask", encode_mask(scene.truth.mask_of(k)), path.string());
        }
      }
    } else if (*init) {
      ProjectConfig c = cfg;
      if (!in_classes.empty()) {
        c.classes.clear();
        const auto names = split_list(in_classes);
        const auto palette = default_palette(names.size());
        for (std::size_t i = 0; i < names.size(); ++i) c.classes.push_back({names[i], to_hex(palette[i])});
      }
      Project::init(in_root, c);
      std::cout << "project " << fs::absolute(in_root).string() << "\n";
    } else if (*serve) {
      auto project = Project::open(sv_root);
      Server server(project, {sv_static});
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << fmt::format("serving {} on http://{}:{}", sv_root, sv_host, sv_port) << std::endl;
      if (!server.listen(sv_host, sv_port)) {
        std::cerr << fmt::format("error: cannot listen on {}:{} (port busy?)\n", sv_host, sv_port);
        return 1;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what();
    if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
