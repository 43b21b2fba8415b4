#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pivotmt/metrics.hpp"
#include "pivotmt/model.hpp"
#include "pivotmt/optimizer.hpp"
#include "pivotmt/subword.hpp"
#include "pivotmt/text_pipeline.hpp"

namespace pivotmt {

struct VocabSpec {
  VocabMode mode = VocabMode::separate;
  std::size_t target_size = kDefaultVocabSize;
};

struct TrainProgress {
  std::size_t step = 0;
  double loss = 0.0;  // mean over the steps since the previous report
  double lr = 0.0;
  double elapsed_seconds = 0.0;
  std::optional<double> validation_loss;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  AdamHyper adam;
  /// Linear learning-rate warmup over this many steps; 0 disables it.
  std::size_t warmup_steps = 0;
  std::uint64_t seed = 1;

  /// Validation loss is measured every `eval_every` steps when a validation
  /// corpus is supplied; training stops after `patience` evaluations without
  /// improvement (0 = never stop early).
  std::size_t eval_every = 0;
  std::size_t patience = 0;

  std::size_t log_every = 50;
  std::function<void(const TrainProgress&)> on_log;

  std::size_t checkpoint_every = 0;
  std::function<void(std::size_t step, const Parameters&)> on_checkpoint;
};

/// A trained direction together with everything needed to run it on raw
/// text: its vocabularies and the source-side preprocessing rules.
struct TranslationSystem {
  ModelConfig config;
  Parameters params;
  SubwordVocab src_vocab;
  SubwordVocab tgt_vocab;
  std::string src_lang;
  std::string tgt_lang;
  RuleSet rules;

  /// Throws ConfigError when the vocabularies, config and parameters
  /// disagree or the language tags coincide.
  void validate() const;
};

struct DecodeSettings {
  std::size_t beam_size = 4;
  std::size_t max_len = 64;
  double length_norm_alpha = 0.6;
};

/// Learns vocabularies per `vocab_spec`, sizes the model to them and trains.
TranslationSystem train_system(const ParallelCorpus& corpus, const VocabSpec& vocab_spec,
                               ModelConfig model_config, const TrainConfig& train_config,
                               const RuleSet& src_rules = {},
                               const ParallelCorpus* validation = nullptr);

/// Trains with vocabularies learned elsewhere (pass the same vocabulary twice
/// for shared mode).
TranslationSystem train_system(const ParallelCorpus& corpus, SubwordVocab src_vocab,
                               SubwordVocab tgt_vocab, ModelConfig model_config,
                               const TrainConfig& train_config, const RuleSet& src_rules = {},
                               const ParallelCorpus* validation = nullptr);

/// Decodes an already tokenized source sentence.
Sentence translate_tokens(const TranslationSystem& system, const Sentence& source,
                          const DecodeSettings& settings);

/// Tokenizes with the system's rules, translates and detokenizes.
std::string translate(const TranslationSystem& system, std::string_view raw,
                      const DecodeSettings& settings);

/// Two independently trained systems chained through the pivot language.
class CascadePipeline {
 public:
  /// Throws ConfigError unless stage1's target language is stage2's source.
  CascadePipeline(TranslationSystem stage1, TranslationSystem stage2, DecodeSettings settings);

  const TranslationSystem& stage1() const { return stage1_; }
  const TranslationSystem& stage2() const { return stage2_; }
  const DecodeSettings& settings() const { return settings_; }
  void set_settings(const DecodeSettings& settings) { settings_ = settings; }

 private:
  TranslationSystem stage1_;
  TranslationSystem stage2_;
  DecodeSettings settings_;
};

struct CascadeResult {
  std::string pivot_text;
  std::string output_text;
};

/// Source text -> stage1 -> pivot text -> stage2 -> target text. Failures
/// are rethrown as StageError naming the stage.
CascadeResult cascade_translate(std::string_view raw_src, const CascadePipeline& pipeline);

/// Runs stage2 alone on pivot text, exactly as the cascade does.
std::string translate_pivot(std::string_view pivot_text, const CascadePipeline& pipeline);

struct CascadeEvaluation {
  BleuReport cascade;
  std::optional<BleuReport> stage1;  // source -> pivot, against pivot references
  std::optional<BleuReport> stage2;  // gold pivot -> target
  std::vector<CascadeResult> outputs;
};

/// Translates every source segment of `test` through the cascade and scores
/// the result against its target side. When `pivot_references` is given,
/// each stage is also scored on its own.
CascadeEvaluation evaluate_cascade(const ParallelCorpus& test, const CascadePipeline& pipeline,
                                   const std::vector<Sentence>* pivot_references = nullptr);

/// System manifest (key=value):
///
///     version=1
///     checkpoint=<file>   src_vocab=<file>   tgt_vocab=<file>
///     src_lang=<tag>      tgt_lang=<tag>     rules=<file>   (optional)
///
/// Relative paths resolve against the manifest's directory. `save_system`
/// writes `<stem>.ckpt`, the vocabularies (`<stem>.vocab` when shared,
/// otherwise `<stem>.src.vocab` and `<stem>.tgt.vocab`) and `<stem>.rules`
/// next to the manifest.
void save_system(const TranslationSystem& system, const std::filesystem::path& manifest);
TranslationSystem load_system(const std::filesystem::path& manifest);

/// Pipeline manifest: `version=1`, every system key prefixed with `stage1.`
/// or `stage2.`, and `decode.beam_size`, `decode.max_len`,
/// `decode.length_norm_alpha`.
CascadePipeline load_pipeline(const std::filesystem::path& manifest);
void write_pipeline_manifest(const std::filesystem::path& manifest,
                             const std::filesystem::path& stage1_system,
                             const std::filesystem::path& stage2_system,
                             const DecodeSettings& settings);

}  // namespace pivotmt
