// Copyright 2026 The serbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "ser/audio.hpp"
#include "ser/error.hpp"
#include "ser/ingestion.hpp"
#include "test_support.hpp"

namespace ser {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::data_dir;
using testing::write_file;

void write_wav(const fs::path& path, double seconds, std::uint32_t rate = 16000) {
  fs::create_directories(path.parent_path());
  const std::vector<float> x(static_cast<std::size_t>(seconds * rate), 0.1f);
  const auto bytes = encode_wav(x, rate, 1);
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

AdapterRule bundled_rule(const std::string& ds) { return load_adapter_rules(data_dir() / "adapters" / (ds + ".json")).at(0); }

TEST(Scan, RavdessFilenameCoding) {
  TempDir dir;
  write_wav(dir / "Actor_12/03-01-05-01-02-01-12.wav", 3.0, 48000);
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("RAVDESS"));
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.skipped.empty());
  const auto& rec = r.records[0];
  EXPECT_EQ(rec.speaker_id, "12");
  EXPECT_EQ(rec.native_label, "angry");
  EXPECT_EQ(rec.dataset_id, "RAVDESS");
  EXPECT_EQ(rec.id, "RAVDESS/Actor_12/03-01-05-01-02-01-12.wav");
  EXPECT_EQ(rec.sample_rate_hz, 16000u);
  EXPECT_NEAR(rec.duration_s, 3.0, 1.0 / 16000);
}

TEST(Scan, RavdessAllEmotionCodes) {
  TempDir dir;
  const std::vector<std::string> names = {"neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"};
  for (int code = 1; code <= 8; ++code) write_wav(dir / ("03-01-0" + std::to_string(code) + "-01-01-01-03.wav"), 2.5);
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("RAVDESS"));
  ASSERT_EQ(r.records.size(), 8u);
  for (int code = 0; code < 8; ++code) EXPECT_EQ(r.records[code].native_label, names[code]);
}

TEST(Scan, EmptyDirectory) {
  TempDir dir;
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("RAVDESS"));
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.skipped.empty());
}

TEST(Scan, UnmatchedFileOnlyInSkipList) {
  TempDir dir;
  write_wav(dir / "readme-take.wav", 2.0);
  write_wav(dir / "03-01-04-01-01-01-07.wav", 2.0);
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("RAVDESS"));
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].path, "readme-take.wav");
}

TEST(Scan, UndecodableFileIsSkipped) {
  TempDir dir;
  write_file(dir / "03-01-04-01-01-01-07.wav", "not a wav file");
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("RAVDESS"));
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.skipped.size(), 1u);
}

TEST(Scan, MetadataTableSuppliesLabels) {
  TempDir dir;
  write_wav(dir / "Session1/Ses01F_impro01_F000.wav", 2.0);
  write_wav(dir / "Session1/Ses01F_impro01_M001.wav", 2.0);
  write_wav(dir / "Session1/Ses01F_impro01_M002.wav", 2.0);
  write_file(dir / "labels.tsv", "utterance\temotion\nSes01F_impro01_F000\tneu\nSes01F_impro01_M001\texc\n");
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("IEMOCAP"));
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].speaker_id, "Ses01F");
  EXPECT_EQ(r.records[0].native_label, "neu");
  EXPECT_EQ(r.records[1].speaker_id, "Ses01M");
  EXPECT_EQ(r.records[1].native_label, "exc");
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_NE(r.skipped[0].reason.find("metadata"), std::string::npos);
}

TEST(Scan, EnglishOnlyDropsOtherLanguages) {
  TempDir dir;
  write_wav(dir / "0003/Happy/0003_000001.wav", 2.0);
  write_wav(dir / "0013/Happy/0013_000001.wav", 2.0);
  const ScanResult r = scan_dataset(dir.path(), bundled_rule("ESD"));
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].speaker_id, "0013");
  EXPECT_EQ(r.records[0].language, "en");
  ASSERT_EQ(r.skipped.size(), 1u);
}

TEST(Scan, RuleWithoutSpeakerSourceIsAPatternError) {
  TempDir dir;
  write_wav(dir / "a_angry.wav", 2.0);
  AdapterRule rule;
  rule.dataset_id = "X";
  rule.pattern = R"((?<native_label>[a-z]+)_[a-z]+\.wav)";
  try {
    scan_dataset(dir.path(), rule);
    FAIL() << "expected PatternError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PatternError);
  }
}

TEST(Scan, FileMatchingTwoRulesIsAPatternError) {
  TempDir dir;
  write_wav(dir / "s1_angry.wav", 2.0);
  AdapterRule a{"A", R"((?<speaker_id>s\d)_(?<native_label>[a-z]+)\.wav)", {}, {}, "en", false, std::nullopt};
  AdapterRule b = a;
  b.dataset_id = "B";
  const std::vector<AdapterRule> rules = {a, b};
  try {
    scan_dataset(dir.path(), rules);
    FAIL() << "expected PatternError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PatternError);
  }
}

TEST(Scan, ParallelScanMatchesSerial) {
  TempDir dir;
  for (int actor = 1; actor <= 4; ++actor) {
    for (int emo = 1; emo <= 8; ++emo) {
      char name[64];
      std::snprintf(name, sizeof name, "Actor_%02d/03-01-%02d-01-01-01-%02d.wav", actor, emo, actor);
      write_wav(dir / name, 2.0 + 0.1 * emo);
    }
  }
  const auto serial = scan_dataset(dir.path(), bundled_rule("RAVDESS"), 1);
  const auto parallel = scan_dataset(dir.path(), bundled_rule("RAVDESS"), 4);
  EXPECT_EQ(serial.records.size(), 32u);
  EXPECT_EQ(serial.records, parallel.records);
}

TEST(Scan, ScanFilterScanIsAFixedPoint) {
  TempDir dir;
  const double durations[] = {1.5, 2.0, 6.0, 13.0, 14.0};
  for (int i = 0; i < 5; ++i) write_wav(dir / ("03-01-01-01-01-01-0" + std::to_string(i + 1) + ".wav"), durations[i]);
  const auto first = duration_filter(scan_dataset(dir.path(), bundled_rule("RAVDESS")).records);
  ASSERT_EQ(first.size(), 3u);
  TempDir copy;
  for (const auto& r : first) {
    const auto rel = r.id.substr(r.id.find('/') + 1);
    fs::copy_file(dir / rel, copy / rel);
  }
  EXPECT_EQ(duration_filter(scan_dataset(copy.path(), bundled_rule("RAVDESS")).records), first);
}

TEST(DurationFilter, InclusiveBounds) {
  std::vector<UtteranceRecord> recs;
  for (double d : {1.9, 2.0, 7.5, 13.0, 13.01}) recs.push_back(testing::make_record("D", "s", std::to_string(d), EmotionLabel::sad, d));
  const auto kept = duration_filter(recs);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].duration_s, 2.0);
  EXPECT_EQ(kept[1].duration_s, 7.5);
  EXPECT_EQ(kept[2].duration_s, 13.0);
  EXPECT_TRUE(duration_filter({}).empty());
  const std::vector<UtteranceRecord> inside(kept.begin(), kept.end());
  EXPECT_EQ(duration_filter(inside), inside);
}

TEST(Manifest, JsonLinesRoundTrip) {
  TempDir dir;
  std::vector<UtteranceRecord> recs = {testing::make_record("A", "s1", "x.wav", EmotionLabel::angry, 2.25),
                                       testing::make_record("B", "s2", "y.wav", EmotionLabel::calm, 12.5)};
  recs[1].unified_label.reset();
  recs[1].language = "de";
  write_manifest(dir / "m.jsonl", recs);
  EXPECT_EQ(read_manifest(dir / "m.jsonl"), recs);
}

TEST(Manifest, DuplicateIdsAndBadLinesAreRejected) {
  TempDir dir;
  const auto r = testing::make_record("A", "s1", "x.wav", EmotionLabel::angry);
  write_file(dir / "dup.jsonl", record_to_json_line(r) + "\n" + record_to_json_line(r) + "\n");
  try {
    read_manifest(dir / "dup.jsonl");
    FAIL() << "expected DuplicateId";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DuplicateId);
  }
  write_file(dir / "bad.jsonl", "{\"id\": 3\n");
  try {
    read_manifest(dir / "bad.jsonl");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
}

TEST(Manifest, SkipListSitsNextToManifest) {
  EXPECT_EQ(skipped_path("out/ravdess.jsonl"), fs::path("out/ravdess.jsonl.skipped"));
}

TEST(Adapters, EveryBundledAdapterParses) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(data_dir() / "adapters")) {
    const auto rules = load_adapter_rules(entry.path());
    ASSERT_FALSE(rules.empty()) << entry.path();
    EXPECT_EQ(rules[0].dataset_id + ".json", entry.path().filename().string());
    ++n;
  }
  EXPECT_EQ(n, 11u);
}

}  // namespace
}  // namespace ser
