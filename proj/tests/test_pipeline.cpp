#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "vegmap/pipeline/server.hpp"
#include "vegmap/synthfield.hpp"
#include "vegmap/vegmap.hpp"

using namespace vegmap;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vegmap-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

ProjectConfig preset_config() {
  ProjectConfig cfg;
  for (const auto& n : {"bv", "ca", "sa", "soil"}) cfg.classes.push_back({n, ""});
  cfg.size = 64;
  cfg.folds = 3;
  return cfg;
}

std::string as_string(const Bytes& b) { return {b.begin(), b.end()}; }
Bytes as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

const Scene& scene() {
  static const Scene s = generate_scene(field_preset(3, 768, 512));
  return s;
}

}  // namespace

TEST(Project, InitOpenAndImages) {
  const auto dir = fresh_dir("project");
  auto p = Project::init(dir, preset_config());
  EXPECT_THROW(Project::init(dir, preset_config()), Error);
  const auto png = encode_png(scene().image);
  const auto rec = p.add_image(png, "field.png");
  EXPECT_EQ(rec.id, image_id_for(png));
  EXPECT_EQ(rec.id.rfind("img-", 0), 0u);
  EXPECT_EQ(p.add_image(png).id, rec.id);
  EXPECT_EQ(p.images().size(), 1u);
  EXPECT_EQ(p.image_bytes(rec.id), png);

  const auto reopened = Project::open(dir);
  EXPECT_EQ(reopened.images().size(), 1u);
  EXPECT_EQ(reopened.config().class_names(), preset_config().class_names());
  EXPECT_THROW(p.image("img-000000000000"), Error);
  EXPECT_THROW(Project::open(dir / "missing"), Error);

  write_text_file(dir / "project.json", "{not json");
  try {
    Project::open(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
  }
  fs::remove_all(dir);
}

TEST(Project, MasksAndArtifacts) {
  const auto dir = fresh_dir("artifacts");
  auto p = Project::init(dir, preset_config());
  const auto id = p.add_image(encode_png(scene().image)).id;
  const auto mask_png = encode_mask(scene().truth.mask_of(0));
  p.put_mask(id, "bv", mask_png);
  EXPECT_EQ(p.mask_bytes(id, "bv"), mask_png);
  EXPECT_FALSE(p.has_mask(id, "ca"));
  EXPECT_THROW(p.put_mask(id, "nope", mask_png), Error);
  EXPECT_THROW(p.put_mask(id, "ca", encode_mask(CoverMask("ca", 4, 4))), Error);

  const auto a = p.store(ArtifactKind::manifest, "x\n", {"test", {}, {}});
  EXPECT_EQ(p.store(ArtifactKind::manifest, "x\n", {"test", {}, {}}), a);
  EXPECT_EQ(a, "man-" + sha256_hex("x\n").substr(0, 12));
  std::size_t artifact_records = 0;
  for (const auto& r : p.provenance_records()) artifact_records += r.contains("kind");
  EXPECT_EQ(artifact_records, 1u);
  EXPECT_EQ(p.provenance_records().size(), 3u);  // add_image, put_mask, store
  EXPECT_EQ(p.load(ArtifactKind::manifest, a), "x\n");
  EXPECT_FALSE(p.has(ArtifactKind::manifest, "../project"));
  EXPECT_THROW(p.load(ArtifactKind::model, a), Error);
  EXPECT_EQ(p.list(ArtifactKind::manifest), std::vector<std::string>{a});
  fs::remove_all(dir);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fresh_dir("server");
    project_ = std::make_unique<Project>(Project::init(dir_, preset_config()));
    server_ = std::make_unique<Server>(*project_);
    port_ = server_->bind_any("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }

  void TearDown() override {
    server_->stop();
    thread_.join();
    client_.reset();
    server_.reset();
    project_.reset();
    fs::remove_all(dir_);
  }

  nlohmann::json post_json(const std::string& path, const nlohmann::json& body, int expect) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, expect) << res->body;
    return nlohmann::json::parse(res->body);
  }

  // Submits a job and polls until it finishes; returns the final job record.
  nlohmann::json run_job(const std::string& path, const nlohmann::json& body) {
    const auto accepted = post_json(path, body, 202);
    const auto id = accepted.at("job_id").get<std::string>();
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
    for (;;) {
      auto res = client_->Get("/api/jobs/" + id);
      EXPECT_EQ(res->status, 200);
      auto j = nlohmann::json::parse(res->body);
      if (j["status"] == "done" || j["status"] == "failed") return j;
      if (std::chrono::steady_clock::now() > deadline) return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  std::string upload_scene() {
    const auto png = as_string(encode_png(scene().image));
    auto res = client_->Post("/api/images?name=field.png", png, "image/png");
    EXPECT_EQ(res->status, 201);
    const auto id = nlohmann::json::parse(res->body).at("id").get<std::string>();
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& name = scene().truth.class_list[k];
      auto put = client_->Put("/api/images/" + id + "/masks/" + name,
                              as_string(encode_mask(scene().truth.mask_of(k))), "image/png");
      EXPECT_EQ(put->status, 200) << put->body;
    }
    return id;
  }

  fs::path dir_;
  std::unique_ptr<Project> project_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServerTest, MaskRoundTripIsBitIdentical) {
  const auto id = upload_scene();
  auto res = client_->Get("/api/images/" + id + "/masks/ca");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->body, as_string(encode_mask(scene().truth.mask_of(1))));
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  auto full = client_->Get("/api/images/" + id + "/full.png?maxdim=100");
  ASSERT_EQ(full->status, 200);
  const auto small = decode_image(as_bytes(full->body));
  EXPECT_EQ(std::max(small.width(), small.height()), 100);
}

TEST_F(ServerTest, ErrorsCarryCodeMessageDetail) {
  auto res = client_->Get("/api/manifests/man-000000000000");
  ASSERT_EQ(res->status, 404);
  const auto j = nlohmann::json::parse(res->body);
  EXPECT_EQ(j["code"], "not_found");
  EXPECT_TRUE(j.contains("message"));
  EXPECT_EQ(j["detail"], "man-000000000000");
  post_json("/api/embed", {{"manifest_id", "man-000000000000"}}, 404);
  const auto train = post_json("/api/train", {{"manifest_id", "man-000000000000"}, {"features_id", "feat-0"}}, 404);
  EXPECT_EQ(train["code"], "not_found");
  post_json("/api/classes", {{"name", "bv"}}, 409);
  post_json("/api/select", {{"class", "bv"}}, 400);
  EXPECT_EQ(client_->Get("/api/nothing")->status, 404);
  EXPECT_EQ(client_->Post("/api/images", "not an image", "image/png")->status, 400);
  EXPECT_EQ(client_->Get("/api/classes/bv/hue-ranges")->status, 404);
}

TEST_F(ServerTest, SpectrumAndHueRanges) {
  const auto id = upload_scene();
  auto res = client_->Get("/api/images/" + id + "/spectrum?class=soil");
  ASSERT_EQ(res->status, 200);
  const auto j = nlohmann::json::parse(res->body);
  const auto expect = compute_hue_spectrum(scene().image, scene().truth.mask_of(3), kDefaultSatMin);
  EXPECT_EQ(j["pixel_count"].get<std::size_t>(), expect.pixel_count);
  EXPECT_EQ(j["bins"].get<std::vector<double>>(), std::vector<double>(expect.bins.begin(), expect.bins.end()));

  auto put = client_->Put("/api/classes/soil/hue-ranges", R"({"ranges": "25-55,210-235"})", "application/json");
  ASSERT_EQ(put->status, 200) << put->body;
  auto get = client_->Get("/api/classes/soil/hue-ranges");
  EXPECT_EQ(nlohmann::json::parse(get->body)["text"], "25-55,210-235");
}

TEST_F(ServerTest, SelectMatchesDirectComputation) {
  const auto id = upload_scene();
  const auto job = run_job("/api/select", {{"image_id", id}, {"class", "bv"}, {"hue", "55-125"}, {"sth", 0.9}});
  ASSERT_EQ(job["status"], "done") << job.dump();
  const auto manifest_id = job["result"].get<std::string>();
  const auto served = client_->Get("/api/manifests/" + manifest_id)->body;

  SelectRequest r;
  r.image_id = id;
  r.class_name = "bv";
  r.hue = HueRangeSet::parse("55-125");
  r.size = 64;
  const auto direct = manifest_to_jsonl(run_select(scene().image, scene().truth.mask_of(0), r));
  EXPECT_EQ(served, direct);
  EXPECT_EQ(manifest_id, content_id("man", direct));
}

TEST_F(ServerTest, SelectMatchesCliOutput) {
#ifdef VEGMAP_CLI_PATH
  const auto id = upload_scene();
  const auto job = run_job("/api/select", {{"image_id", id}, {"class", "sa"}, {"hue", "55-165"}, {"size", 128},
                                           {"sth", 0.9}, {"shifts", 3}});
  ASSERT_EQ(job["status"], "done") << job.dump();
  const auto served = client_->Get("/api/manifests/" + job["result"].get<std::string>())->body;

  write_file_bytes(dir_ / "scene.png", encode_png(scene().image));
  write_file_bytes(dir_ / "sa.png", encode_mask(scene().truth.mask_of(2)));
  const auto cmd = fmt::format("{} select --image {} --mask {} --class sa --hue 55-165 --size 128 --sth 0.9 "
                               "--shifts 3 --out {} > /dev/null",
                               VEGMAP_CLI_PATH, (dir_ / "scene.png").string(), (dir_ / "sa.png").string(),
                               (dir_ / "cli.jsonl").string());
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(read_text_file(dir_ / "cli.jsonl"), served);
#else
  GTEST_SKIP() << "command-line tool not built";
#endif
}

TEST_F(ServerTest, FailedJobReportsDiagnostics) {
  const auto id = upload_scene();
  const auto job = run_job("/api/select", {{"image_id", id}, {"class", "bv"}, {"sth", 1.5}});
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["diagnostics"]["code"], "invalid_argument");
  const auto log = read_text_file(dir_ / "jobs.jsonl");
  EXPECT_NE(log.find("\"failed\""), std::string::npos);
}

TEST_F(ServerTest, EndToEndTrainPredictOverlay) {
  const auto id = upload_scene();
  const auto ranges = field_preset_ranges();
  std::vector<std::string> manifests;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto job = run_job("/api/select", {{"image_id", id},
                                             {"class", scene().truth.class_list[k]},
                                             {"hue", ranges[k].to_string()},
                                             {"shifts", 2}});
    ASSERT_EQ(job["status"], "done") << job.dump();
    manifests.push_back(job["result"]);
  }
  std::vector<TileManifest> parts;
  for (const auto& m : manifests) parts.push_back(manifest_from_jsonl(client_->Get("/api/manifests/" + m)->body));
  const auto merged_id = project_->store(ArtifactKind::manifest, manifest_to_jsonl(merge_manifests(parts)),
                                         {"merge", manifests, {}});

  const auto embed = run_job("/api/embed", {{"manifest_id", merged_id}});
  ASSERT_EQ(embed["status"], "done") << embed.dump();
  const auto features_id = embed["result"].get<std::string>();
  const auto csv = client_->Get("/api/features/" + features_id)->body;
  EXPECT_EQ(feature_matrix_from_csv(csv).layout_id(), kBaselineLayout);

  const auto train = run_job("/api/train", {{"manifest_id", merged_id}, {"features_id", features_id},
                                            {"learner", "rf"}, {"seed", 1}});
  ASSERT_EQ(train["status"], "done") << train.dump();
  const auto model_id = train["result"].get<std::string>();
  const auto model = model_from_json(nlohmann::json::parse(client_->Get("/api/models/" + model_id)->body));
  EXPECT_EQ(model.class_list, (std::vector<std::string>{"bv", "ca", "sa", "soil"}));

  const auto cv = run_job("/api/cv", {{"manifest_id", merged_id}, {"features_id", features_id},
                                      {"learners", {"tree", "knn"}}});
  ASSERT_EQ(cv["status"], "done") << cv.dump();
  const auto report_csv = client_->Get("/api/reports/" + cv["result"].get<std::string>() + "?format=csv")->body;
  EXPECT_EQ(report_csv.substr(0, report_csv.find('\n')), kCvCsvHeader);
  EXPECT_EQ(std::count(report_csv.begin(), report_csv.end(), '\n'), 3);

  const auto pred = run_job("/api/predict", {{"model_id", model_id}, {"image_id", id}});
  ASSERT_EQ(pred["status"], "done") << pred.dump();
  const auto map_id = pred["result"].get<std::string>();
  const auto map = map_from_json(nlohmann::json::parse(client_->Get("/api/maps/" + map_id)->body));
  EXPECT_EQ(map.rows, 8);
  EXPECT_EQ(map.cols, 12);

  auto overlay = client_->Get("/api/maps/" + map_id + "/overlay.png?classes=ca&alpha=1");
  ASSERT_EQ(overlay->status, 200) << overlay->body;
  const auto tinted = decode_image(as_bytes(overlay->body));
  const auto expect = render_overlay(map, scene().image, {"ca"}, project_->config().palette(), 1.0);
  EXPECT_EQ(tinted, expect);

  const auto stats = client_->Get("/api/maps/" + map_id + "/stats")->body;
  EXPECT_EQ(stats, class_area_csv(class_area_stats(map)));
  EXPECT_EQ(client_->Get("/api/maps/" + map_id + "/overlay.png?classes=zz")->status, 400);
}
