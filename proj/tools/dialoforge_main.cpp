// dialoforge command-line interface.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dialoforge/api_server.hpp"
#include "dialoforge/blend_sampler.hpp"
#include "dialoforge/errors.hpp"
#include "dialoforge/evaluate.hpp"
#include "dialoforge/fusion.hpp"
#include "dialoforge/fusion_io.hpp"
#include "dialoforge/manifest.hpp"
#include "dialoforge/pipeline.hpp"
#include "dialoforge/review_store.hpp"
#include "dialoforge/text.hpp"

namespace df = dialoforge;

namespace {

// ---- forge run ----

struct RunArgs {
  df::PipelineConfig cfg;
  std::string subset = "emotion";
  std::string wer_mode = "per_utterance";
  std::string stop_after;
  std::vector<std::size_t> fail_indices;
};

int forge_run(RunArgs& a) {
  auto& cfg = a.cfg;
  cfg.subset = *df::parse_subset(a.subset);
  cfg.gate.wer_mode = a.wer_mode == "dialogue_average" ? df::WerMode::dialogue_average : df::WerMode::per_utterance;
  if (!a.stop_after.empty()) cfg.stop_after = df::parse_stage(a.stop_after);
  cfg.mock.always_fail_asr.insert(a.fail_indices.begin(), a.fail_indices.end());
  cfg.endpoints = df::ClientEndpoints::from_env();
  const auto res = df::run_pipeline(cfg);
  std::cout << "dialogues: " << res.entries.size() << " entries, " << res.failures.size() << " failures, "
            << res.resumed << " resumed from checkpoints\n";
  std::cout << "machine pass: " << res.stats.machine_pass << ", fail: " << res.stats.machine_fail << "\n";
  for (const auto& f : res.failures) std::cout << "failed " << f.id << " at " << f.stage << ": " << f.error << "\n";
  if (res.interrupted) {
    std::cout << "stopped after stage '" << a.stop_after << "'; rerun without --stop-after to resume\n";
    return 0;
  }
  std::cout << "manifest: " << res.manifest_path.string() << "\n";
  return 0;
}

// ---- forge serve ----

int forge_serve(const std::string& manifest, const df::ApiOptions& opts) {
  auto store = std::make_shared<df::ReviewStore>(manifest);
  df::ApiServer server(store, opts);
  const int port = server.bind();
  std::cout << "serving " << manifest << " on http://" << opts.host << ":" << port << std::endl;
  server.serve();
  return 0;
}

// ---- blend ----

std::vector<std::string> ids_from_file(const std::string& path) {
  if (path.empty()) return {};
  if (path.size() >= df::kManifestExtension.size() &&
      path.compare(path.size() - df::kManifestExtension.size(), std::string::npos, df::kManifestExtension) == 0) {
    std::vector<std::string> ids;
    for (const auto& e : df::read_manifest_file(path)) ids.push_back(e.id());
    return ids;
  }
  std::vector<std::string> ids;
  for (const auto& line : df::text::split(df::read_text_file(path), '\n')) {
    auto t = df::text::trim(line);
    if (!t.empty()) ids.push_back(std::move(t));
  }
  return ids;
}

struct BlendArgs {
  double alpha = 0.2;
  std::uint64_t seed = 0;
  std::uint64_t draws = 0;
  std::size_t batch = 0;
  std::string synthetic, real;
  std::string sampling = "with_replacement";
};

int blend(const BlendArgs& a) {
  df::BlendConfig cfg;
  cfg.alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.synthetic_pool = ids_from_file(a.synthetic);
  cfg.real_pool = ids_from_file(a.real);
  cfg.sampling = a.sampling == "epoch_shuffle" ? df::PoolSampling::epoch_shuffle : df::PoolSampling::with_replacement;
  if (a.draws > 0) {
    df::BlendConfig src_only = cfg;
    src_only.synthetic_pool = {"s"};
    src_only.real_pool = {"r"};
    df::BlendSampler s(src_only);
    std::uint64_t synthetic = 0;
    for (std::uint64_t i = 0; i < a.draws; ++i) synthetic += s.next_source() == df::DataSource::synthetic;
    std::printf("draws=%llu synthetic=%llu fraction=%.6f alpha=%.6f\n", static_cast<unsigned long long>(a.draws),
                static_cast<unsigned long long>(synthetic), static_cast<double>(synthetic) / a.draws, a.alpha);
  }
  if (a.batch > 0) {
    df::BlendSampler s(cfg);
    for (const auto& t : s.sample_batch(a.batch)) std::cout << df::to_string(t.source) << "\t" << t.entry_id << "\n";
  }
  if (a.draws == 0 && a.batch == 0) throw df::ConfigError("blend needs --draws and/or --batch");
  return 0;
}

// ---- evaluate ----

struct EvalArgs {
  std::string manifest, predictions, report;
  std::string bleu_level = "corpus";
  double rouge_beta = 1.0;
  bool judge = false;
  std::uint64_t seed = 0;
};

int evaluate(const EvalArgs& a) {
  const auto entries = df::read_manifest_file(a.manifest);
  const auto preds = df::eval::parse_predictions(df::read_text_file(a.predictions));
  df::eval::MockTokenEmbedder embedder;
  df::eval::EvaluateOptions opts;
  opts.bleu_level = a.bleu_level == "sentence" ? df::eval::BleuLevel::sentence : df::eval::BleuLevel::corpus;
  opts.rouge_beta = a.rouge_beta;
  opts.seed = a.seed;
  std::unique_ptr<df::ChatClient> judge;
  if (a.judge) {
    const auto ep = df::ClientEndpoints::from_env();
    if (ep.llm) {
      judge = std::make_unique<df::HttpChatClient>(*ep.llm);
    } else {
      judge = std::make_unique<df::MockChatClient>();
    }
    opts.judge = judge.get();
  }
  const auto rep = df::eval::evaluate_corpus(entries, preds, embedder, opts);
  const std::string out = df::eval::report_to_json(rep);
  if (a.report.empty()) {
    std::cout << out;
  } else {
    df::write_file_atomic(a.report, out);
    std::printf("bleu=%.4f rouge_l=%.4f meteor=%.4f embed=%.4f f1_emotion=%.4f dialogues=%zu\n", rep.corpus.bleu,
                rep.corpus.rouge_l, rep.corpus.meteor, rep.corpus.embed_score, rep.corpus.f1_emotion,
                rep.per_dialogue.size());
  }
  return 0;
}

// ---- fusion gradcheck ----

struct GradArgs {
  std::uint64_t seed = 0;
  double eps = 1e-5;
  int instances = 1;
  double tolerance = 1e-4;
  std::string gate_mode = "per_window";
  std::string rounding = "ceil";
  std::string save;
};

int gradcheck(const GradArgs& a) {
  double worst = 0.0;
  for (int i = 0; i < a.instances; ++i) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    auto p = df::fusion::random_problem(seed);
    p.cfg.gate_mode = a.gate_mode == "per_frame" ? df::fusion::GateMode::per_frame : df::fusion::GateMode::per_window;
    p.cfg.rounding = a.rounding == "floor" ? df::fusion::WindowRounding::floor : df::fusion::WindowRounding::ceil;
    const auto r = df::fusion::backward_and_gradcheck(p.model, p.cfg, p.instance, a.eps);
    worst = std::max(worst, r.max_rel_error);
    std::printf("seed=%llu params=%zu loss=%.6f max_rel_error=%.3e worst=%s[%ld] %s\n",
                static_cast<unsigned long long>(seed), r.checked, r.loss, r.max_rel_error, r.worst_param.c_str(),
                static_cast<long>(r.worst_index), r.max_rel_error < a.tolerance ? "PASS" : "FAIL");
    if (!a.save.empty() && i == 0) df::fusion::save_model(a.save, p.model);
  }
  const bool pass = worst < a.tolerance;
  std::printf("max_rel_error=%.3e tolerance=%.1e %s\n", worst, a.tolerance, pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialoforge: synthetic spoken-dialogue corpus toolkit"};
  app.require_subcommand(1);

  // forge
  auto* forge = app.add_subcommand("forge", "Craft, inspect, review and serve a corpus");
  forge->require_subcommand(1);

  RunArgs run;
  auto* run_cmd = forge->add_subcommand("run", "Generate (or resume) a corpus");
  std::string out_dir = "corpus";
  run_cmd->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  run_cmd->add_option("--subset", run.subset, "emotion | audio | music")
      ->check(CLI::IsMember({"emotion", "audio", "music"}))
      ->capture_default_str();
  run_cmd->add_option("-n,--count", run.cfg.corpus_size, "Number of dialogues")->capture_default_str();
  run_cmd->add_option("--seed", run.cfg.seed, "Run seed")->capture_default_str();
  run_cmd->add_option("--history-min", run.cfg.n_history_min, "Fewest history rounds")->capture_default_str();
  run_cmd->add_option("--history-max", run.cfg.n_history_max, "Most history rounds")->capture_default_str();
  run_cmd->add_option("--workers", run.cfg.workers, "Worker threads (0 = all cores)")->capture_default_str();
  run_cmd->add_option("--wer-threshold", run.cfg.gate.wer_threshold, "WER gate")->capture_default_str();
  run_cmd->add_option("--wer-mode", run.wer_mode, "per_utterance | dialogue_average")
      ->check(CLI::IsMember({"per_utterance", "dialogue_average"}))
      ->capture_default_str();
  run_cmd->add_option("--cosine-threshold", run.cfg.gate.cosine_threshold, "Speaker cosine gate")
      ->capture_default_str();
  run_cmd->add_option("--max-attempts", run.cfg.gate.max_attempts, "Synthesis attempts per dialogue")
      ->capture_default_str();
  run_cmd->add_option("--snr-min", run.cfg.scene.snr_min_db, "Lowest scene SNR (dB)")->capture_default_str();
  run_cmd->add_option("--snr-max", run.cfg.scene.snr_max_db, "Highest scene SNR (dB)")->capture_default_str();
  run_cmd->add_option("--stop-after", run.stop_after, "Stop every dialogue after this stage")
      ->check(CLI::IsMember({"scripted", "rendered", "gated", "mixed"}));
  run_cmd->add_option("--asr-corruption", run.cfg.mock.asr_corruption, "Mock ASR word corruption rate")
      ->capture_default_str();
  run_cmd->add_option("--fail-index", run.fail_indices, "Dialogue index whose mock ASR always fails");
  run_cmd->add_option("--malformed-rate", run.cfg.mock.malformed_script_rate, "Mock LLM malformed-answer rate")
      ->capture_default_str();
  run_cmd->add_option("--tts-rate", run.cfg.mock.tts_native_rate, "Mock TTS native sample rate")
      ->capture_default_str();
  run_cmd->callback([&] {
    run.cfg.output_dir = out_dir;
    std::exit(forge_run(run));
  });

  std::string manifest;
  auto* stats_cmd = forge->add_subcommand("stats", "Corpus statistics as JSON");
  stats_cmd->add_option("manifest", manifest, "Manifest file")->required();
  stats_cmd->callback([&] { std::cout << df::stats_to_json(df::corpus_stats(df::read_manifest_file(manifest))); });

  df::ApiOptions api;
  auto* serve_cmd = forge->add_subcommand("serve", "Serve the review API");
  serve_cmd->add_option("manifest", manifest, "Manifest file")->required();
  serve_cmd->add_option("--host", api.host)->capture_default_str();
  serve_cmd->add_option("--port", api.port)->capture_default_str();
  serve_cmd->add_flag("--finalized-only", api.finalized_only, "Serve audio only for approved entries");
  serve_cmd->callback([&] { std::exit(forge_serve(manifest, api)); });

  std::string export_out;
  auto* export_cmd = forge->add_subcommand("export", "Write machine-passed, human-approved entries");
  export_cmd->add_option("manifest", manifest, "Manifest file")->required();
  export_cmd->add_option("-o,--out", export_out, "Output manifest")->required();
  export_cmd->callback([&] {
    const auto finalized = df::export_finalized(df::read_manifest_file(manifest));
    df::write_manifest_file(export_out, finalized);
    std::cout << finalized.size() << " finalized entries written to " << export_out << "\n";
  });

  auto* pending_cmd = forge->add_subcommand("pending", "List entries awaiting review");
  pending_cmd->add_option("manifest", manifest, "Manifest file")->required();
  pending_cmd->callback([&] {
    for (const auto& s : df::list_pending_reviews(df::read_manifest_file(manifest))) {
      std::printf("%s\t%s\tturns=%zu\tattempts=%d\tmax_wer=%.3f\tmin_cos=%.3f\n", s.id.c_str(),
                  std::string(df::to_string(s.subset)).c_str(), s.turn_count, s.attempts_used, s.max_wer,
                  s.speaker_min_cosine);
    }
  });

  std::string review_id, verdict, reason, reviewer = "cli";
  auto* review_cmd = forge->add_subcommand("review", "Record a human verdict");
  review_cmd->add_option("manifest", manifest, "Manifest file")->required();
  review_cmd->add_option("--id", review_id)->required();
  review_cmd->add_option("--verdict", verdict)->required()->check(CLI::IsMember({"approved", "rejected"}));
  review_cmd->add_option("--reason", reason);
  review_cmd->add_option("--reviewer", reviewer)->capture_default_str();
  review_cmd->callback([&] {
    df::ReviewStore store(manifest);
    store.record(review_id, verdict == "approved" ? df::ReviewStatus::approved : df::ReviewStatus::rejected, reason,
                 reviewer);
    std::cout << review_id << " -> " << verdict << "\n";
  });

  // blend
  BlendArgs blend_args;
  auto* blend_cmd = app.add_subcommand("blend", "Synthetic/real blend sampling");
  blend_cmd->add_option("--alpha", blend_args.alpha, "Synthetic share")->capture_default_str();
  blend_cmd->add_option("--seed", blend_args.seed)->capture_default_str();
  blend_cmd->add_option("--draws", blend_args.draws, "Count source draws and print the synthetic fraction");
  blend_cmd->add_option("--batch,--n", blend_args.batch, "Print a batch of tagged entry ids");
  blend_cmd->add_option("--synthetic", blend_args.synthetic, "Synthetic pool (manifest or id-per-line file)");
  blend_cmd->add_option("--real", blend_args.real, "Real pool (manifest or id-per-line file)");
  blend_cmd->add_option("--sampling", blend_args.sampling, "with_replacement | epoch_shuffle")
      ->check(CLI::IsMember({"with_replacement", "epoch_shuffle"}))
      ->capture_default_str();
  blend_cmd->callback([&] { std::exit(blend(blend_args)); });

  // evaluate
  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predicted final responses against a manifest");
  eval_cmd->add_option("--manifest", eval_args.manifest)->required();
  eval_cmd->add_option("--predictions", eval_args.predictions, "JSONL with id, text, emotion")->required();
  eval_cmd->add_option("--report", eval_args.report, "Report path (stdout when omitted)");
  eval_cmd->add_option("--bleu-level", eval_args.bleu_level)
      ->check(CLI::IsMember({"corpus", "sentence"}))
      ->capture_default_str();
  eval_cmd->add_option("--rouge-beta", eval_args.rouge_beta)->capture_default_str();
  eval_cmd->add_flag("--gpt-eval", eval_args.judge, "Also ask the judge model for a 1-5 score");
  eval_cmd->add_option("--seed", eval_args.seed)->capture_default_str();
  eval_cmd->callback([&] { std::exit(evaluate(eval_args)); });

  // fusion
  auto* fusion = app.add_subcommand("fusion", "Fusion kernel checks");
  fusion->require_subcommand(1);
  GradArgs grad;
  auto* grad_cmd = fusion->add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  grad_cmd->add_option("--seed", grad.seed)->capture_default_str();
  grad_cmd->add_option("--eps", grad.eps)->capture_default_str();
  grad_cmd->add_option("--instances", grad.instances)->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance)->capture_default_str();
  grad_cmd->add_option("--gate-mode", grad.gate_mode)
      ->check(CLI::IsMember({"per_window", "per_frame"}))
      ->capture_default_str();
  grad_cmd->add_option("--rounding", grad.rounding)->check(CLI::IsMember({"ceil", "floor"}))->capture_default_str();
  grad_cmd->add_option("--save-params", grad.save, "Write the first instance's parameters to a tensor file");
  grad_cmd->callback([&] { std::exit(gradcheck(grad)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const df::StartupError& e) {
    std::cerr << "startup error: " << e.what() << "\n";
    return 3;
  } catch (const df::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
