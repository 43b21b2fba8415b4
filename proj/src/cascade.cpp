#include "pivotmt/cascade.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "pivotmt/checkpoint.hpp"
#include "pivotmt/decoding.hpp"
#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"
#include "pivotmt/rng.hpp"

namespace pivotmt {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5851f42d4c957f2dULL;
constexpr std::uint64_t kDropoutStream = 0x14057b7ef767814fULL;
constexpr std::size_t kEvalBatch = 64;

std::vector<Example> make_examples(const ParallelCorpus& corpus, const SubwordVocab& src_vocab,
                                   const SubwordVocab& tgt_vocab, const ModelConfig& config,
                                   std::size_t* skipped) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  std::size_t dropped = 0;
  for (const auto& pair : corpus.pairs()) {
    Example ex{src_vocab.encode(pair.src, true), tgt_vocab.encode(pair.tgt, true)};
    if (ex.src.size() > config.max_seq_len || ex.tgt.size() - 1 > config.max_seq_len) {
      ++dropped;
      continue;
    }
    out.push_back(std::move(ex));
  }
  if (skipped) *skipped = dropped;
  return out;
}

double mean_loss(const std::vector<Example>& examples, const Parameters& params,
                 const ModelConfig& config) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t at = 0; at < examples.size(); at += kEvalBatch) {
    const std::vector<Example> slice(
        examples.begin() + static_cast<std::ptrdiff_t>(at),
        examples.begin() + static_cast<std::ptrdiff_t>(std::min(at + kEvalBatch, examples.size())));
    const Batch batch = Batch::from_examples(slice);
    const std::size_t n = batch.target_tokens();
    total += loss(forward(batch, params, config), batch.tgt_out_ids, batch.tgt_mask) *
             static_cast<double>(n);
    tokens += n;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base_dir / p;
}

std::string relative_to(const std::filesystem::path& target, const std::filesystem::path& dir) {
  const auto abs_target = std::filesystem::absolute(target).lexically_normal();
  const auto abs_dir = std::filesystem::absolute(dir).lexically_normal();
  const auto rel = abs_target.lexically_relative(abs_dir);
  return rel.empty() ? abs_target.string() : rel.string();
}

std::filesystem::path dir_of(const std::filesystem::path& file) {
  auto parent = file.parent_path();
  return parent.empty() ? std::filesystem::path(".") : parent;
}

const std::set<std::string> kSystemKeys = {"checkpoint", "src_vocab", "tgt_vocab",
                                           "src_lang",   "tgt_lang",  "rules"};

TranslationSystem system_from(const KeyValues& kv, const std::string& prefix,
                              const std::filesystem::path& base_dir) {
  auto key = [&](const char* k) { return prefix + k; };
  TranslationSystem sys;
  const auto ck = load_checkpoint(resolve(base_dir, kv.require(key("checkpoint"))));
  sys.config = ck.config;
  sys.params = ck.params;
  sys.src_vocab = SubwordVocab::load(resolve(base_dir, kv.require(key("src_vocab"))));
  sys.tgt_vocab = SubwordVocab::load(resolve(base_dir, kv.require(key("tgt_vocab"))));
  sys.src_lang = kv.require(key("src_lang"));
  sys.tgt_lang = kv.require(key("tgt_lang"));
  if (auto rules = kv.get(key("rules")); rules && !rules->empty())
    sys.rules = CorpusRules::load(resolve(base_dir, *rules)).src;
  sys.validate();
  return sys;
}

}  // namespace

void TranslationSystem::validate() const {
  config.validate();
  if (src_lang.empty() || tgt_lang.empty()) throw ConfigError("language tags must be non-empty");
  if (src_lang == tgt_lang)
    throw ConfigError("source and target language tags must differ: " + src_lang);
  if (config.src_vocab_size != src_vocab.size() || config.tgt_vocab_size != tgt_vocab.size())
    throw ConfigError(fmt::format(
        "model vocabulary sizes {}/{} do not match the vocabularies {}/{}", config.src_vocab_size,
        config.tgt_vocab_size, src_vocab.size(), tgt_vocab.size()));
  check_parameters(params, config);
}

TranslationSystem train_system(const ParallelCorpus& corpus, const VocabSpec& vocab_spec,
                               ModelConfig model_config, const TrainConfig& train_config,
                               const RuleSet& src_rules, const ParallelCorpus* validation) {
  if (corpus.empty()) throw TrainingError("cannot train on an empty corpus");
  std::vector<SubwordVocab> vocabs;
  try {
    vocabs = learn({corpus.src_side(), corpus.tgt_side()}, vocab_spec.target_size, vocab_spec.mode);
  } catch (const Error& e) {
    throw TrainingError(std::string("vocabulary learning failed: ") + e.what());
  }
  if (vocab_spec.mode == VocabMode::shared) vocabs.push_back(vocabs.front());
  return train_system(corpus, std::move(vocabs[0]), std::move(vocabs[1]), model_config,
                      train_config, src_rules, validation);
}

TranslationSystem train_system(const ParallelCorpus& corpus, SubwordVocab src_vocab,
                               SubwordVocab tgt_vocab, ModelConfig model_config,
                               const TrainConfig& train_config, const RuleSet& src_rules,
                               const ParallelCorpus* validation) {
  if (corpus.empty()) throw TrainingError("cannot train on an empty corpus");
  if (train_config.batch_size == 0) throw ConfigError("batch size must be at least 1");
  model_config.src_vocab_size = src_vocab.size();
  model_config.tgt_vocab_size = tgt_vocab.size();
  model_config.validate();

  TranslationSystem sys;
  sys.config = model_config;
  sys.src_lang = corpus.src_lang();
  sys.tgt_lang = corpus.tgt_lang();
  sys.rules = src_rules;
  sys.params = init_parameters(model_config, train_config.seed);
  sys.src_vocab = std::move(src_vocab);
  sys.tgt_vocab = std::move(tgt_vocab);
  sys.validate();
  if (train_config.steps == 0) return sys;

  std::size_t skipped = 0;
  const auto examples = make_examples(corpus, sys.src_vocab, sys.tgt_vocab, sys.config, &skipped);
  if (examples.empty())
    throw TrainingError(fmt::format("all {} pairs exceed max_seq_len {}", skipped,
                                    sys.config.max_seq_len));
  std::vector<Example> valid_examples;
  if (validation) valid_examples = make_examples(*validation, sys.src_vocab, sys.tgt_vocab, sys.config, nullptr);

  Rng order_rng(train_config.seed ^ kShuffleStream);
  Rng dropout_rng(train_config.seed ^ kDropoutStream);
  AdamState state = AdamState::for_parameters(sys.params);
  std::vector<std::size_t> order(examples.size());
  std::size_t cursor = order.size();

  const auto start = std::chrono::steady_clock::now();
  double loss_since_log = 0.0;
  std::size_t steps_since_log = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t evals_without_gain = 0;

  std::vector<Example> batch_examples;
  for (std::size_t step = 1; step <= train_config.steps; ++step) {
    batch_examples.clear();
    while (batch_examples.size() < train_config.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch_examples.push_back(examples[order[cursor++]]);
      if (batch_examples.size() == examples.size()) break;
    }
    AdamHyper hyper = train_config.adam;
    if (train_config.warmup_steps > 0)
      hyper.lr *= std::min(1.0, static_cast<double>(step) /
                                    static_cast<double>(train_config.warmup_steps));

    const Batch batch = Batch::from_examples(batch_examples);
    double step_loss = 0.0;
    try {
      step_loss = train_step(batch, sys.params, state, hyper, sys.config, &dropout_rng);
    } catch (const TrainingError& e) {
      throw TrainingError(fmt::format("{}-{} training diverged: {}", sys.src_lang, sys.tgt_lang,
                                      e.what()));
    }
    loss_since_log += step_loss;
    ++steps_since_log;

    TrainProgress progress;
    progress.step = step;
    progress.lr = hyper.lr;
    bool stop = false;
    const bool evaluate = !valid_examples.empty() && train_config.eval_every > 0 &&
                          step % train_config.eval_every == 0;
    if (evaluate) {
      const double v = mean_loss(valid_examples, sys.params, sys.config);
      progress.validation_loss = v;
      if (v < best_valid) {
        best_valid = v;
        evals_without_gain = 0;
      } else if (train_config.patience > 0 && ++evals_without_gain >= train_config.patience) {
        stop = true;
      }
    }
    const bool log_now = train_config.on_log &&
                         ((train_config.log_every > 0 && step % train_config.log_every == 0) ||
                          evaluate || stop || step == train_config.steps);
    if (log_now) {
      progress.loss = loss_since_log / static_cast<double>(steps_since_log);
      progress.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      train_config.on_log(progress);
      loss_since_log = 0.0;
      steps_since_log = 0;
    }
    if (train_config.on_checkpoint && train_config.checkpoint_every > 0 &&
        step % train_config.checkpoint_every == 0)
      train_config.on_checkpoint(step, sys.params);
    if (stop) break;
  }
  return sys;
}

Sentence translate_tokens(const TranslationSystem& system, const Sentence& source,
                          const DecodeSettings& settings) {
  IdSequence src = system.src_vocab.encode(source, true);
  if (src.size() > system.config.max_seq_len) {
    src.ids.resize(system.config.max_seq_len);
    src.ids.back() = SpecialIds::eos;
  }
  const IdSequence out =
      settings.beam_size <= 1
          ? greedy_decode(src, system.params, system.config, settings.max_len)
          : beam_decode(src, system.params, system.config, settings.beam_size, settings.max_len,
                        settings.length_norm_alpha);
  return system.tgt_vocab.decode(out, system.tgt_lang);
}

std::string translate(const TranslationSystem& system, std::string_view raw,
                      const DecodeSettings& settings) {
  return detokenize(
      translate_tokens(system, tokenize(raw, system.src_lang, system.rules), settings));
}

CascadePipeline::CascadePipeline(TranslationSystem stage1, TranslationSystem stage2,
                                 DecodeSettings settings)
    : stage1_(std::move(stage1)), stage2_(std::move(stage2)), settings_(settings) {
  try {
    stage1_.validate();
  } catch (const Error& e) {
    throw StageError("stage1", e);
  }
  try {
    stage2_.validate();
  } catch (const Error& e) {
    throw StageError("stage2", e);
  }
  if (stage1_.tgt_lang != stage2_.src_lang)
    throw ConfigError(fmt::format("pivot mismatch: stage1 produces '{}' but stage2 reads '{}'",
                                  stage1_.tgt_lang, stage2_.src_lang));
}

std::string translate_pivot(std::string_view pivot_text, const CascadePipeline& pipeline) {
  try {
    return translate(pipeline.stage2(), pivot_text, pipeline.settings());
  } catch (const Error& e) {
    throw StageError("stage2", e);
  }
}

CascadeResult cascade_translate(std::string_view raw_src, const CascadePipeline& pipeline) {
  CascadeResult result;
  try {
    result.pivot_text = translate(pipeline.stage1(), raw_src, pipeline.settings());
  } catch (const Error& e) {
    throw StageError("stage1", e);
  }
  result.output_text = translate_pivot(result.pivot_text, pipeline);
  return result;
}

CascadeEvaluation evaluate_cascade(const ParallelCorpus& test, const CascadePipeline& pipeline,
                                   const std::vector<Sentence>* pivot_references) {
  if (test.empty()) throw InputError("cannot evaluate on an empty test corpus");
  if (pivot_references && pivot_references->size() != test.size())
    throw InputError("pivot references do not align with the test corpus");

  CascadeEvaluation eval;
  std::vector<Sentence> hyps;
  std::vector<Sentence> pivots;
  std::vector<Sentence> refs;
  for (const auto& pair : test.pairs()) {
    eval.outputs.push_back(cascade_translate(detokenize(pair.src), pipeline));
    hyps.push_back(split_tokens(eval.outputs.back().output_text, test.tgt_lang()));
    pivots.push_back(split_tokens(eval.outputs.back().pivot_text, pipeline.stage1().tgt_lang));
    refs.push_back(pair.tgt);
  }
  eval.cascade = bleu(hyps, refs);

  if (pivot_references) {
    eval.stage1 = bleu(pivots, *pivot_references);
    std::vector<Sentence> direct;
    for (const auto& pivot : *pivot_references)
      direct.push_back(split_tokens(translate_pivot(detokenize(pivot), pipeline), test.tgt_lang()));
    eval.stage2 = bleu(direct, refs);
  }
  return eval;
}

void save_system(const TranslationSystem& system, const std::filesystem::path& manifest) {
  system.validate();
  const auto dir = dir_of(manifest);
  const std::string stem = manifest.stem().string();
  const bool shared = system.src_vocab.mode() == VocabMode::shared &&
                      system.src_vocab == system.tgt_vocab;

  const std::string ckpt = stem + ".ckpt";
  const std::string src_vocab = shared ? stem + ".vocab" : stem + ".src.vocab";
  const std::string tgt_vocab = shared ? stem + ".vocab" : stem + ".tgt.vocab";
  const std::string rules = stem + ".rules";

  save_checkpoint(dir / ckpt, system.config, system.params);
  system.src_vocab.save(dir / src_vocab);
  if (!shared) system.tgt_vocab.save(dir / tgt_vocab);
  io::write_file_atomic(dir / rules, CorpusRules{system.rules, {}}.to_keyvalues().to_string());

  KeyValues kv;
  kv.set("version", "1");
  kv.set("checkpoint", ckpt);
  kv.set("src_vocab", src_vocab);
  kv.set("tgt_vocab", tgt_vocab);
  kv.set("src_lang", system.src_lang);
  kv.set("tgt_lang", system.tgt_lang);
  kv.set("rules", rules);
  io::write_file_atomic(manifest, kv.to_string());
}

TranslationSystem load_system(const std::filesystem::path& manifest) {
  const auto kv = KeyValues::load(manifest);
  std::set<std::string> allowed = kSystemKeys;
  allowed.insert("version");
  kv.reject_unknown(allowed);
  if (kv.get_int("version") != 1) throw ConfigError(manifest.string() + ": unsupported version");
  return system_from(kv, "", dir_of(manifest));
}

CascadePipeline load_pipeline(const std::filesystem::path& manifest) {
  const auto kv = KeyValues::load(manifest);
  std::set<std::string> allowed = {"version", "decode.beam_size", "decode.max_len",
                                   "decode.length_norm_alpha"};
  for (const auto& k : kSystemKeys) {
    allowed.insert("stage1." + k);
    allowed.insert("stage2." + k);
  }
  kv.reject_unknown(allowed);
  if (kv.get_int("version") != 1) throw ConfigError(manifest.string() + ": unsupported version");

  DecodeSettings settings;
  const auto beam = kv.get_int("decode.beam_size", static_cast<std::int64_t>(settings.beam_size));
  const auto max_len = kv.get_int("decode.max_len", static_cast<std::int64_t>(settings.max_len));
  if (beam < 1 || max_len < 1) throw ConfigError(manifest.string() + ": decode settings must be positive");
  settings.beam_size = static_cast<std::size_t>(beam);
  settings.max_len = static_cast<std::size_t>(max_len);
  settings.length_norm_alpha = kv.get_double("decode.length_norm_alpha", settings.length_norm_alpha);

  const auto dir = dir_of(manifest);
  TranslationSystem stage1;
  TranslationSystem stage2;
  try {
    stage1 = system_from(kv, "stage1.", dir);
  } catch (const Error& e) {
    throw StageError("stage1", e);
  }
  try {
    stage2 = system_from(kv, "stage2.", dir);
  } catch (const Error& e) {
    throw StageError("stage2", e);
  }
  return CascadePipeline(std::move(stage1), std::move(stage2), settings);
}

void write_pipeline_manifest(const std::filesystem::path& manifest,
                             const std::filesystem::path& stage1_system,
                             const std::filesystem::path& stage2_system,
                             const DecodeSettings& settings) {
  const auto out_dir = dir_of(manifest);
  KeyValues out;
  out.set("version", "1");
  const std::pair<const char*, const std::filesystem::path*> stages[] = {
      {"stage1.", &stage1_system}, {"stage2.", &stage2_system}};
  for (const auto& [prefix, path] : stages) {
    const auto kv = KeyValues::load(*path);
    const auto base = dir_of(*path);
    for (const auto& key : {"checkpoint", "src_vocab", "tgt_vocab", "rules"})
      if (auto v = kv.get(key); v && !v->empty())
        out.set(std::string(prefix) + key, relative_to(resolve(base, *v), out_dir));
    out.set(std::string(prefix) + "src_lang", kv.require("src_lang"));
    out.set(std::string(prefix) + "tgt_lang", kv.require("tgt_lang"));
  }
  out.set("decode.beam_size", std::to_string(settings.beam_size));
  out.set("decode.max_len", std::to_string(settings.max_len));
  out.set("decode.length_norm_alpha", format_double(settings.length_norm_alpha));
  io::write_file_atomic(manifest, out.to_string());
}

}  // namespace pivotmt
