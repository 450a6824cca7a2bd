// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "sarstream/core.hpp"
#include "sarstream/rng.hpp"

using namespace sarstream;
using namespace sarstream::core;

namespace {

// Brute-force edit distance: explores all scripts up to `budget` edits and
// returns the canonical (min edits, max matches) counts. Test-only oracle,
// independent of the DP implementation.
struct BruteResult {
  int edits = 1 << 20;
  int matches = -1;
};

void brute_rec(std::span<const int> ref, std::span<const int> hyp, int edits, int matches,
               int budget, BruteResult& best) {
  if (edits > budget) return;
  if (ref.empty() && hyp.empty()) {
    if (edits < best.edits || (edits == best.edits && matches > best.matches))
      best = {edits, matches};
    return;
  }
  if (!ref.empty() && !hyp.empty()) {
    if (ref[0] == hyp[0])
      brute_rec(ref.subspan(1), hyp.subspan(1), edits, matches + 1, budget, best);
    else
      brute_rec(ref.subspan(1), hyp.subspan(1), edits + 1, matches, budget, best);
  }
  if (!ref.empty()) brute_rec(ref.subspan(1), hyp, edits + 1, matches, budget, best);
  if (!hyp.empty()) brute_rec(ref, hyp.subspan(1), edits + 1, matches, budget, best);
}

EditCounts brute_edit(std::span<const int> ref, std::span<const int> hyp, int budget) {
  BruteResult best;
  brute_rec(ref, hyp, 0, 0, budget, best);
  const int n = static_cast<int>(ref.size()), m = static_cast<int>(hyp.size());
  EditCounts c;
  c.sub = n + m - 2 * best.matches - best.edits;
  c.del = n - best.matches - c.sub;
  c.ins = m - best.matches - c.sub;
  return c;
}

const int A = 1, B = 2, C = 3, X = 4, BL = 0;

}  // namespace

TEST_SUITE("core") {

TEST_CASE("normalize_alignment collapses runs then removes blanks") {
  CHECK(normalize_alignment(std::vector{A, A, BL, B, BL, B}, 8) == std::vector{A, B, B});
  CHECK(normalize_alignment(std::vector{BL, BL, BL}, 8).empty());
  CHECK(normalize_alignment(std::vector{A, BL, A}, 8) == std::vector{A, A});
}

TEST_CASE("normalize_alignment rejects out-of-range ids") {
  CHECK_THROWS_AS(normalize_alignment(std::vector{A, 9}, 8), InputError);
  CHECK_THROWS_AS(normalize_alignment(std::vector{-1}, 8), InputError);
}

TEST_CASE("normalize_alignment is idempotent on repeat-free outputs") {
  // Re-reading the output as an alignment merges adjacent repeats, so the
  // fixed-point property applies when the collapsed form has none.
  Rng rng(5);
  int covered = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<int> labels(static_cast<std::size_t>(rng.uniform_int(0, 30)));
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 4));
    const auto once = normalize_alignment(labels, 5);
    bool has_adjacent_repeat = false;
    for (std::size_t i = 1; i < once.size(); ++i)
      if (once[i] == once[i - 1]) has_adjacent_repeat = true;
    if (has_adjacent_repeat) continue;
    ++covered;
    CHECK(normalize_alignment(once, 5) == once);
  }
  CHECK(covered > 50);
}

TEST_CASE("validate_alignment") {
  CHECK(validate_alignment(std::vector{A, A, BL, B}, std::vector{A, B}, 8));
  CHECK_FALSE(validate_alignment(std::vector{A, B}, std::vector{B, A}, 8));
  CHECK(validate_alignment(std::vector{BL}, std::vector<int>{}, 8));
}

TEST_CASE("edit_distance spec examples") {
  CHECK(edit_distance(std::vector{A, B, C}, std::vector{A, B, C}) == EditCounts{0, 0, 0});
  CHECK(edit_distance(std::vector{A, B}, std::vector{A}) == EditCounts{0, 1, 0});
  // Derived case, frozen from the brute-force oracle below.
  CHECK(edit_distance(std::vector{A, B, C}, std::vector{A, X, B, C}) == EditCounts{0, 0, 1});
  CHECK(brute_edit(std::vector{A, B, C}, std::vector{A, X, B, C}, 4) == EditCounts{0, 0, 1});
}

TEST_CASE("edit_distance empty-ref edge") {
  CHECK(edit_distance(std::vector<int>{}, std::vector{A, B}) == EditCounts{0, 0, 2});
  CHECK(edit_distance(std::vector<int>{}, std::vector<int>{}) == EditCounts{0, 0, 0});
}

TEST_CASE("edit_distance matches brute force on random small cases") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> ref(static_cast<std::size_t>(rng.uniform_int(0, 4)));
    std::vector<int> hyp(static_cast<std::size_t>(rng.uniform_int(0, 4)));
    for (auto& t : ref) t = static_cast<int>(rng.uniform_int(1, 3));
    for (auto& t : hyp) t = static_cast<int>(rng.uniform_int(1, 3));
    CHECK(edit_distance(ref, hyp) == brute_edit(ref, hyp, 8));
  }
}

TEST_CASE("edit_distance identity and swap symmetry") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ref(static_cast<std::size_t>(rng.uniform_int(0, 10)));
    std::vector<int> hyp(static_cast<std::size_t>(rng.uniform_int(0, 10)));
    for (auto& t : ref) t = static_cast<int>(rng.uniform_int(1, 4));
    for (auto& t : hyp) t = static_cast<int>(rng.uniform_int(1, 4));
    CHECK(edit_distance(ref, ref) == EditCounts{0, 0, 0});
    const auto fwd = edit_distance(ref, hyp);
    const auto rev = edit_distance(hyp, ref);
    CHECK(fwd.sub == rev.sub);
    CHECK(fwd.del == rev.ins);
    CHECK(fwd.ins == rev.del);
  }
}

TEST_CASE("synthetic vocab layout") {
  const Vocab v = Vocab::synthetic(20);
  CHECK(v.size() == 22);
  CHECK(v.acoustic_size() == 21);
  CHECK(v.blank_id() == 0);
  CHECK(v.bos_id() == 21);
  CHECK(v.token(1) == "a");
  CHECK(v.id("t") == 20);
  CHECK(v.id("<b>") == 0);
  CHECK(v.id("zz") == -1);
  CHECK_THROWS_AS(Vocab::synthetic(0), InputError);
}

TEST_CASE("transcript and alignment files round-trip") {
  const Vocab v = Vocab::synthetic(5);
  const auto dir = std::filesystem::temp_directory_path() / "sarstream_core_io";
  std::filesystem::create_directories(dir);

  std::vector<Transcript> trs = {{"utt1", {1, 2, 2}}, {"utt2", {}}, {"utt3", {5}}};
  write_transcripts(dir / "text", trs, v);
  const auto trs_back = read_transcripts(dir / "text", v);
  REQUIRE(trs_back.size() == 3);
  CHECK(trs_back[0].utt_id == "utt1");
  CHECK(trs_back[0].tokens == std::vector{1, 2, 2});
  CHECK(trs_back[1].tokens.empty());

  std::vector<FrameAlignment> als = {{"utt1", {0, 1, 1, 0, 2}}, {"utt2", {0}}};
  write_alignments(dir / "align", als);
  const auto als_back = read_alignments(dir / "align", v);
  REQUIRE(als_back.size() == 2);
  CHECK(als_back[0].labels == std::vector{0, 1, 1, 0, 2});

  std::filesystem::remove_all(dir);
}

TEST_CASE("alignment file rejects bos and out-of-range ids") {
  const Vocab v = Vocab::synthetic(5);
  const auto dir = std::filesystem::temp_directory_path() / "sarstream_core_bad";
  std::filesystem::create_directories(dir);
  {
    std::FILE* f = std::fopen((dir / "align").string().c_str(), "w");
    std::fputs("utt1\t0 6 1\n", f);  // 6 == bos id, not a valid frame label
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_alignments(dir / "align", v), FormatError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
