// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sarstream::core {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) throw InputError("Vocab: need at least blank and bos");
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second)
      throw InputError("Vocab: duplicate token '" + tokens_[i] + "'");
  }
}

Vocab Vocab::synthetic(int real_tokens) {
  if (real_tokens < 1) throw InputError("Vocab: need at least one real token");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(real_tokens) + 2);
  tokens.emplace_back("<b>");
  for (int i = 0; i < real_tokens; ++i) {
    if (i < 26) {
      tokens.emplace_back(1, static_cast<char>('a' + i));
    } else {
      tokens.emplace_back("t" + std::to_string(i));
    }
  }
  tokens.emplace_back("<s>");
  return Vocab(std::move(tokens));
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw InputError("Vocab: token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

void Vocab::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw FormatError("cannot open " + file.string() + " for writing");
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

bool PosteriorMatrix::rows_normalized(double tol) const {
  for (int t = 0; t < log_probs.rows(); ++t) {
    const double* row = log_probs.row(t);
    double m = row[0];
    for (int k = 1; k < log_probs.cols(); ++k) m = std::max(m, row[k]);
    double acc = 0.0;
    for (int k = 0; k < log_probs.cols(); ++k) acc += std::exp(row[k] - m);
    if (std::abs(m + std::log(acc)) > tol) return false;
  }
  return true;
}

std::vector<int> normalize_alignment(std::span<const int> labels, int vocab_size,
                                     int blank_id) {
  std::vector<int> out;
  out.reserve(labels.size());
  int prev = -1;
  for (int id : labels) {
    if (id < 0 || id >= vocab_size)
      throw InputError("normalize_alignment: token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(vocab_size));
    if (id != prev && id != blank_id) out.push_back(id);
    prev = id;
  }
  return out;
}

bool validate_alignment(std::span<const int> labels, std::span<const int> transcript,
                        int vocab_size, int blank_id) {
  const auto collapsed = normalize_alignment(labels, vocab_size, blank_id);
  return collapsed.size() == transcript.size() &&
         std::equal(collapsed.begin(), collapsed.end(), transcript.begin());
}

EditCounts edit_distance(std::span<const int> ref, std::span<const int> hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  // Per cell: minimal edits, and maximal matches among minimal-edit paths.
  std::vector<int> edits(static_cast<std::size_t>(n + 1) * (m + 1));
  std::vector<int> matches(static_cast<std::size_t>(n + 1) * (m + 1));
  auto at = [m](int i, int j) { return static_cast<std::size_t>(i) * (m + 1) + j; };

  for (int j = 0; j <= m; ++j) edits[at(0, j)] = j;
  for (int i = 0; i <= n; ++i) edits[at(i, 0)] = i;

  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const bool match = ref[static_cast<std::size_t>(i) - 1] == hyp[static_cast<std::size_t>(j) - 1];
      int best_e = edits[at(i - 1, j - 1)] + (match ? 0 : 1);
      int best_m = matches[at(i - 1, j - 1)] + (match ? 1 : 0);
      const int del_e = edits[at(i - 1, j)] + 1;
      const int del_m = matches[at(i - 1, j)];
      if (del_e < best_e || (del_e == best_e && del_m > best_m)) {
        best_e = del_e;
        best_m = del_m;
      }
      const int ins_e = edits[at(i, j - 1)] + 1;
      const int ins_m = matches[at(i, j - 1)];
      if (ins_e < best_e || (ins_e == best_e && ins_m > best_m)) {
        best_e = ins_e;
        best_m = ins_m;
      }
      edits[at(i, j)] = best_e;
      matches[at(i, j)] = best_m;
    }
  }

  // With E edits and M matches fixed, the split is forced:
  // S = n + m - 2M - E, D = n - M - S, I = m - M - S.
  const int e = edits[at(n, m)];
  const int mm = matches[at(n, m)];
  EditCounts c;
  c.sub = n + m - 2 * mm - e;
  c.del = n - mm - c.sub;
  c.ins = m - mm - c.sub;
  return c;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Splits `utt_id<TAB>payload`; returns false on lines without a tab.
bool split_id_line(const std::string& line, std::string& id, std::string& payload) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos) return false;
  id = line.substr(0, tab);
  payload = line.substr(tab + 1);
  return true;
}

}  // namespace

void write_transcripts(const std::filesystem::path& file,
                       std::span<const Transcript> transcripts, const Vocab& vocab) {
  std::ofstream out(file);
  if (!out) throw FormatError("cannot open " + file.string() + " for writing");
  for (const auto& tr : transcripts) {
    out << tr.utt_id << '\t';
    for (std::size_t i = 0; i < tr.tokens.size(); ++i) {
      if (i) out << ' ';
      out << vocab.token(tr.tokens[i]);
    }
    out << '\n';
  }
}

std::vector<Transcript> read_transcripts(const std::filesystem::path& file,
                                         const Vocab& vocab) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<Transcript> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Transcript tr;
    std::string payload;
    if (!split_id_line(line, tr.utt_id, payload))
      throw FormatError(file.string() + ":" + std::to_string(lineno) + ": missing tab");
    for (const auto& tok : split_ws(payload)) {
      const int id = vocab.id(tok);
      if (id < 0 || id == vocab.blank_id() || id == vocab.bos_id())
        throw FormatError(file.string() + ":" + std::to_string(lineno) +
                          ": invalid transcript token '" + tok + "'");
      tr.tokens.push_back(id);
    }
    out.push_back(std::move(tr));
  }
  return out;
}

void write_alignments(const std::filesystem::path& file,
                      std::span<const FrameAlignment> alignments) {
  std::ofstream out(file);
  if (!out) throw FormatError("cannot open " + file.string() + " for writing");
  for (const auto& al : alignments) {
    out << al.utt_id << '\t';
    for (std::size_t i = 0; i < al.labels.size(); ++i) {
      if (i) out << ' ';
      out << al.labels[i];
    }
    out << '\n';
  }
}

std::vector<FrameAlignment> read_alignments(const std::filesystem::path& file,
                                            const Vocab& vocab) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<FrameAlignment> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    FrameAlignment al;
    std::string payload;
    if (!split_id_line(line, al.utt_id, payload))
      throw FormatError(file.string() + ":" + std::to_string(lineno) + ": missing tab");
    for (const auto& tok : split_ws(payload)) {
      int id = 0;
      try {
        id = std::stoi(tok);
      } catch (const std::exception&) {
        throw FormatError(file.string() + ":" + std::to_string(lineno) +
                          ": non-integer label '" + tok + "'");
      }
      if (id < 0 || id >= vocab.acoustic_size())
        throw FormatError(file.string() + ":" + std::to_string(lineno) +
                          ": label id out of range: " + tok);
      al.labels.push_back(id);
    }
    out.push_back(std::move(al));
  }
  return out;
}

}  // namespace sarstream::core
