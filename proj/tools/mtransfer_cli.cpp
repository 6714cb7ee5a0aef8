/*
 * Copyright 2026 The mtransfer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line entry points: dataset import/export, synthetic data,
// featurization, training, inference, evaluation, distances and serving.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtransfer/mtransfer.hpp"
#include "mtransfer/service.hpp"

namespace fs = std::filesystem;
using namespace mtransfer;

namespace {

// Optional overrides; any flag given on the command line wins over the
// config file.
struct Overrides {
  std::optional<double> alpha_t, alpha_r, beta, gamma;
  bool literal_gripper = false;
  std::optional<double> t_g, t_w;
  std::optional<std::size_t> max_negative_ratio;
  std::optional<std::uint64_t> label_seed;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs_pretrain, epochs_finetune;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> pretrain_learning_rate;
  std::optional<double> dropout;
  std::optional<std::vector<std::size_t>> widths;
  std::optional<std::size_t> target_len;
  std::optional<double> threshold;
  std::optional<int> folds;
  std::optional<std::uint64_t> fold_seed, baseline_seed;
};

void add_dtw_flags(CLI::App* app, Overrides& o) {
  app->add_option("--alpha-t", o.alpha_t, "translation scale (m)");
  app->add_option("--alpha-r", o.alpha_r, "rotation scale (rad)");
  app->add_option("--beta", o.beta, "gripper mismatch weight");
  app->add_option("--gamma", o.gamma, "proximity decay (1/m)");
  app->add_flag("--literal-gripper-indicator", o.literal_gripper,
                "penalize equal gripper states instead of differing ones");
}

void add_train_flags(CLI::App* app, Overrides& o) {
  app->add_option("--t-g", o.t_g, "distance below which demos become positives");
  app->add_option("--t-w", o.t_w, "distance above which demos become negatives");
  app->add_option("--max-negative-ratio", o.max_negative_ratio, "negatives per positive (0 keeps all)");
  app->add_option("--label-seed", o.label_seed, "negative subsampling seed");
  app->add_option("--seed", o.seed, "network initialization and training seed");
  app->add_option("--epochs-pretrain", o.epochs_pretrain);
  app->add_option("--epochs-finetune", o.epochs_finetune);
  app->add_option("--batch-size", o.batch_size);
  app->add_option("--learning-rate", o.learning_rate);
  app->add_option("--pretrain-learning-rate", o.pretrain_learning_rate);
  app->add_option("--dropout", o.dropout, "dropout rate on hidden units");
  app->add_option("--widths", o.widths, "h1_pc h1_lang h1_traj h2_pt h2_lt h3")->expected(6);
  app->add_option("--target-len", o.target_len, "waypoints per embedded trajectory");
}

void add_eval_flags(CLI::App* app, Overrides& o) {
  app->add_option("--threshold", o.threshold, "accuracy threshold on DTW-MT");
  app->add_option("--folds", o.folds);
  app->add_option("--fold-seed", o.fold_seed);
  app->add_option("--baseline-seed", o.baseline_seed);
}

Config resolve(const std::string& config_path, const Overrides& o) {
  Config c = config_path.empty() ? Config{} : load_config(config_path);
  if (o.alpha_t) c.dtw.alpha_t = *o.alpha_t;
  if (o.alpha_r) c.dtw.alpha_r = *o.alpha_r;
  if (o.beta) c.dtw.beta = *o.beta;
  if (o.gamma) c.dtw.gamma = *o.gamma;
  if (o.literal_gripper) c.dtw.literal_gripper_indicator = true;
  if (o.t_g) c.thresholds.t_g = *o.t_g;
  if (o.t_w) c.thresholds.t_w = *o.t_w;
  if (o.max_negative_ratio) c.labels.max_negative_ratio = *o.max_negative_ratio;
  if (o.label_seed) c.labels.seed = *o.label_seed;
  if (o.seed) c.net.rng_seed = *o.seed;
  if (o.epochs_pretrain) c.net.epochs_pretrain = *o.epochs_pretrain;
  if (o.epochs_finetune) c.net.epochs_finetune = *o.epochs_finetune;
  if (o.batch_size) c.net.batch_size = *o.batch_size;
  if (o.learning_rate) c.net.learning_rate = *o.learning_rate;
  if (o.pretrain_learning_rate) c.net.pretrain_learning_rate = *o.pretrain_learning_rate;
  if (o.dropout) c.net.dropout_rate = *o.dropout;
  if (o.widths) {
    const auto& w = *o.widths;
    c.net.widths = {w[0], w[1], w[2], w[3], w[4], w[5]};
  }
  if (o.target_len) c.encoding.target_len = *o.target_len;
  if (o.threshold) c.eval.threshold = *o.threshold;
  if (o.folds) c.eval.folds = *o.folds;
  if (o.fold_seed) c.eval.fold_seed = *o.fold_seed;
  if (o.baseline_seed) c.eval.baseline_seed = *o.baseline_seed;
  c.dtw.validate();
  c.thresholds.validate();
  c.net.validate();
  return c;
}

std::set<std::string> stop_words_from(const std::string& path) {
  return path.empty() ? default_stop_words() : load_stop_words(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
}

nlohmann::json counts_json(const Dataset& d) {
  const auto c = d.counts();
  return {{"objects", c.objects}, {"parts", c.parts}, {"manuals", c.manuals},
          {"instructions", c.instructions}, {"demos", c.demos}, {"hash", dataset_hash(d)}};
}

nlohmann::json report_json(const TrainingReport& r) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& c : r.curves) {
    curves.push_back({{"block", c.block}, {"layer", c.layer}, {"values", c.values}});
  }
  return {{"curves", std::move(curves)}, {"degenerate_labels", r.degenerate_labels}, {"updates", r.updates}};
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mtransfer: manipulation trajectory transfer toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "versioned JSON config")->check(CLI::ExistingFile);
  Overrides o;

  // import
  std::string dataset_dir, out_dir;
  auto* import_cmd = app.add_subcommand("import", "validate a dataset directory and print its counts");
  import_cmd->add_option("dataset", dataset_dir)->required();
  import_cmd->add_option("--out", out_dir, "write a normalized copy");

  // export
  std::string frame_name = "part";
  auto* export_cmd = app.add_subcommand("export", "re-export a dataset");
  export_cmd->add_option("dataset", dataset_dir)->required();
  export_cmd->add_option("--out", out_dir)->required();
  export_cmd->add_option("--frame", frame_name, "part or world")->check(CLI::IsMember({"part", "world"}));

  // synth
  SyntheticSpec spec;
  int synth_folds = kDefaultFolds;
  std::uint64_t synth_fold_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out", out_dir)->required();
  synth_cmd->add_option("--tasks", spec.n_tasks);
  synth_cmd->add_option("--demos", spec.demos_per_task);
  synth_cmd->add_option("--outlier-fraction", spec.outlier_fraction);
  synth_cmd->add_option("--translation-sigma", spec.translation_sigma);
  synth_cmd->add_option("--rotation-sigma", spec.rotation_sigma);
  synth_cmd->add_option("--points", spec.points_per_part);
  synth_cmd->add_option("--shape-seed", spec.shape_seed);
  synth_cmd->add_option("--seed", spec.rng_seed);
  synth_cmd->add_option("--folds", synth_folds, "fold metadata to store (0 for none)");
  synth_cmd->add_option("--fold-seed", synth_fold_seed);

  // featurize
  std::string stop_words_path;
  auto* featurize_cmd = app.add_subcommand("featurize", "write vocabulary, labeled examples and features");
  featurize_cmd->add_option("dataset", dataset_dir)->required();
  featurize_cmd->add_option("--out", out_dir)->required();
  featurize_cmd->add_option("--stop-words", stop_words_path)->check(CLI::ExistingFile);
  bool no_noise = false;
  featurize_cmd->add_flag("--no-noise-handling", no_noise, "trust every crowd demo");
  add_dtw_flags(featurize_cmd, o);
  add_train_flags(featurize_cmd, o);

  // train
  std::string model_path, report_path;
  bool unimodal = false;
  auto* train_cmd = app.add_subcommand("train", "pretrain and fine-tune on a dataset");
  train_cmd->add_option("dataset", dataset_dir)->required();
  train_cmd->add_option("--out", model_path, "checkpoint path")->required();
  train_cmd->add_option("--report", report_path, "training report (JSON)");
  train_cmd->add_option("--stop-words", stop_words_path)->check(CLI::ExistingFile);
  train_cmd->add_flag("--no-noise-handling", no_noise);
  train_cmd->add_flag("--unimodal", unimodal, "single trunk instead of modality-specific layers");
  add_dtw_flags(train_cmd, o);
  add_train_flags(train_cmd, o);

  // infer
  std::string task_id, part_path, instruction;
  std::size_t top = 5;
  auto* infer_cmd = app.add_subcommand("infer", "rank dataset trajectories for a task or a new part");
  infer_cmd->add_option("dataset", dataset_dir)->required();
  infer_cmd->add_option("--model", model_path)->required();
  infer_cmd->add_option("--task", task_id, "dataset task to rank for (its own demos are excluded)");
  infer_cmd->add_option("--part", part_path, "part cloud JSON (with --instruction)");
  infer_cmd->add_option("--instruction", instruction);
  infer_cmd->add_option("--top", top, "rows to print (0 for all)");

  // eval
  std::vector<std::string> models = evaluation_models();
  auto* eval_cmd = app.add_subcommand("eval", "cross-validated transfer evaluation");
  eval_cmd->add_option("dataset", dataset_dir)->required();
  eval_cmd->add_option("--out", out_dir, "directory for report.json / report.csv / report.txt");
  eval_cmd->add_option("--models", models, "rows to evaluate")->check(CLI::IsMember(evaluation_models()));
  add_dtw_flags(eval_cmd, o);
  add_train_flags(eval_cmd, o);
  add_eval_flags(eval_cmd, o);

  // distance
  std::string a_path, b_path;
  bool show_path = false;
  auto* distance_cmd = app.add_subcommand("distance", "DTW-MT between two trajectory files");
  distance_cmd->add_option("a", a_path)->required()->check(CLI::ExistingFile);
  distance_cmd->add_option("b", b_path)->required()->check(CLI::ExistingFile);
  distance_cmd->add_flag("--path", show_path, "also print the alignment");
  add_dtw_flags(distance_cmd, o);

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "serve tasks to the demonstration editor");
  serve_cmd->add_option("dataset", dataset_dir)->required();
  serve_cmd->add_option("--model", model_path, "checkpoint enabling the score endpoint");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*import_cmd) {
      const Dataset d = import_dataset(dataset_dir);
      if (!out_dir.empty()) export_dataset(d, out_dir);
      std::cout << counts_json(d).dump(2) << '\n';
    } else if (*export_cmd) {
      const Dataset d = import_dataset(dataset_dir);
      export_dataset(d, out_dir, frame_name == "world" ? TrajectoryFrame::world : TrajectoryFrame::part);
      std::cout << counts_json(d).dump(2) << '\n';
    } else if (*synth_cmd) {
      Dataset d = generate_synthetic(spec);
      if (synth_folds > 0) d.folds = make_folds(d.tasks, synth_fold_seed, synth_folds).fold_of_task;
      export_dataset(d, out_dir);
      std::cout << counts_json(d).dump(2) << '\n';
    } else if (*featurize_cmd) {
      const Config c = resolve(config_path, o);
      const Dataset d = import_dataset(dataset_dir);
      auto settings = c.train_settings(!no_noise);
      settings.stop_words = stop_words_from(stop_words_path);
      std::vector<std::string> corpus;
      for (const auto& t : d.tasks) corpus.push_back(t.instruction);
      const Vocabulary vocab = Vocabulary::build(corpus, settings.stop_words);
      const auto pool = demo_pool(d.tasks);
      const auto examples = settings.noise_handling
                                ? generate_examples(d.tasks, pool, c.thresholds, c.dtw, c.labels)
                                : trust_all_examples(d.tasks, c.labels);
      const auto feats = featurize_examples(d.tasks, pool, examples, vocab, c.encoding);
      fs::create_directories(out_dir);
      vocab.save((fs::path(out_dir) / "vocab.txt").string());
      std::ofstream ex(fs::path(out_dir) / "examples.jsonl");
      std::ofstream fe(fs::path(out_dir) / "features.jsonl");
      for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& e = examples[i];
        nlohmann::json j{{"task", e.task}, {"traj", e.traj}, {"label", e.label},
                         {"delta", e.delta ? nlohmann::json(*e.delta) : nlohmann::json(nullptr)}};
        ex << j.dump() << '\n';
        const auto col = static_cast<Eigen::Index>(i);
        auto vec = [&](const Eigen::MatrixXd& m) {
          std::vector<double> v(static_cast<std::size_t>(m.rows()));
          for (Eigen::Index r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(r)] = m(r, col);
          return v;
        };
        fe << nlohmann::json{{"task", e.task}, {"traj", e.traj}, {"label", e.label},
                             {"pc", vec(feats.batch.pc)}, {"lang", vec(feats.batch.lang)},
                             {"traj_features", vec(feats.batch.traj)}}
                  .dump()
           << '\n';
      }
      std::cout << nlohmann::json{{"examples", examples.size()}, {"vocab", vocab.size()}, {"vocab_id", vocab.id()}}
                       .dump(2)
                << '\n';
    } else if (*train_cmd) {
      const Config c = resolve(config_path, o);
      const Dataset d = import_dataset(dataset_dir);
      auto settings = c.train_settings(!no_noise);
      settings.stop_words = stop_words_from(stop_words_path);
      if (unimodal) settings.net.multimodal = false;
      const TrainResult r = train_transfer_model(d.tasks, settings);
      save_model(r.model, model_path);
      std::size_t positives = 0;
      for (const auto& e : r.examples) positives += e.label == 1 ? 1 : 0;
      const nlohmann::json report{{"config", to_json(c)},
                                  {"noise_handling", settings.noise_handling},
                                  {"multimodal", settings.net.multimodal},
                                  {"examples", r.examples.size()},
                                  {"positives", positives},
                                  {"vocab_id", r.model.vocab.id()},
                                  {"pretrain", report_json(r.pretrain_report)},
                                  {"finetune", report_json(r.finetune_report)},
                                  {"checkpoint_hash", checkpoint_json(r.model).at("hash")}};
      if (!report_path.empty()) write_json_file(report_path, report);
      std::cout << "trained on " << r.examples.size() << " examples (" << positives
                << " positive); checkpoint " << model_path << '\n';
    } else if (*infer_cmd) {
      const Dataset d = import_dataset(dataset_dir);
      const TransferModel model = load_model(model_path);
      std::shared_ptr<const PointCloudPart> part;
      PartFrame frame;
      std::string text = instruction;
      std::string exclude;
      if (!task_id.empty()) {
        const TaskInstance* t = d.find_task(task_id);
        if (!t) throw Error(ErrorCode::not_found, "unknown task '" + task_id + "'");
        part = t->part;
        frame = t->frame;
        if (text.empty()) text = t->instruction;
        exclude = t->id;
      } else if (!part_path.empty() && !instruction.empty()) {
        auto p = std::make_shared<PointCloudPart>(part_from_json(read_json_file(part_path), part_path));
        frame = compute_part_frame(*p);
        part = p;
      } else {
        throw Error(ErrorCode::invalid_argument, "infer needs --task, or --part with --instruction");
      }
      std::vector<Trajectory> candidates;
      for (const auto& t : d.tasks) {
        if (t.id != exclude) candidates.insert(candidates.end(), t.demos.begin(), t.demos.end());
      }
      auto ranked = infer(model, *part, frame, text, candidates);
      if (top > 0 && ranked.size() > top) ranked.resize(top);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : ranked) out.push_back({{"id", r.id}, {"score", r.score}});
      std::cout << out.dump(2) << '\n';
    } else if (*eval_cmd) {
      const Config c = resolve(config_path, o);
      const Dataset d = import_dataset(dataset_dir);
      const EvalReport report = run_evaluation(d.tasks, c, models, [](const std::string& name) {
        std::cerr << "evaluating " << name << "...\n";
      });
      const std::string text = to_text(report);
      std::cout << text;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file((fs::path(out_dir) / "report.json").string(),
                        {{"config", to_json(c)}, {"dataset", dataset_hash(d)}, {"report", to_json(report)}});
        write_text(fs::path(out_dir) / "report.csv", to_csv(report));
        write_text(fs::path(out_dir) / "report.txt", text);
      }
    } else if (*distance_cmd) {
      const Config c = resolve(config_path, o);
      const auto r = dtw_mt(load_trajectory(a_path), load_trajectory(b_path), c.dtw);
      std::cout << std::setprecision(17) << r.distance << '\n';
      if (show_path) {
        for (const auto& [i, j] : r.path) std::cout << i << ' ' << j << '\n';
      }
    } else if (*serve_cmd) {
      Dataset d = import_dataset(dataset_dir);
      std::optional<TransferModel> model;
      if (!model_path.empty()) model = load_model(model_path);
      DemoService service(std::move(d), dataset_dir, std::move(model));
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "serving " << dataset_dir << " on http://" << host << ':' << port << '\n';
      if (!server.listen(host, port)) throw Error(ErrorCode::io, "cannot listen on port " + std::to_string(port));
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
