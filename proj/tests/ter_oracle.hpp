// Copyright 2026 The paravat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef PARAVAT_TESTS_TER_ORACLE_HPP_
#define PARAVAT_TESTS_TER_ORACLE_HPP_

#include <algorithm>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "paravat/metrics.hpp"

namespace paravat::testing {

// Exhaustive TER oracle, written independently of the library: block moves
// come from std::rotate and the edit distance from a full DP table.
using Seq = std::vector<int>;

inline int OracleLevenshtein(const Seq& a, const Seq& b) {
  std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    }
  }
  return d[a.size()][b.size()];
}

inline std::vector<Seq> AllBlockMoves(const Seq& s) {
  std::vector<Seq> out;
  const size_t n = s.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j <= n; ++j) {
      // move [i, j) right so it ends at k
      for (size_t k = j + 1; k <= n; ++k) {
        Seq t = s;
        std::rotate(t.begin() + i, t.begin() + j, t.begin() + k);
        out.push_back(t);
      }
      // move [i, j) left so it starts at k
      for (size_t k = 0; k < i; ++k) {
        Seq t = s;
        std::rotate(t.begin() + k, t.begin() + i, t.begin() + j);
        out.push_back(t);
      }
    }
  }
  return out;
}

// Minimal number of block moves from s to every reachable arrangement.
inline std::map<Seq, int> ShiftDistances(const Seq& s) {
  std::map<Seq, int> dist{{s, 0}};
  std::deque<Seq> queue{s};
  while (!queue.empty()) {
    Seq cur = queue.front();
    queue.pop_front();
    int d = dist[cur];
    for (auto& next : AllBlockMoves(cur)) {
      if (dist.emplace(next, d + 1).second) queue.push_back(next);
    }
  }
  return dist;
}

inline std::vector<Seq> AllSequences(int max_len, int alphabet) {
  std::vector<Seq> out{{}};
  for (size_t begin = 0; begin < out.size(); ++begin) {
    if (static_cast<int>(out[begin].size()) == max_len) continue;
    for (int a = 0; a < alphabet; ++a) {
      Seq s = out[begin];
      s.push_back(a);
      out.push_back(s);
    }
  }
  return out;
}

inline Words ToWords(const Seq& s) {
  Words w;
  for (int x : s) w.push_back(std::string(1, static_cast<char>('a' + x)));
  return w;
}

// Minimal shifts + edits over every arrangement reachable from the
// hypothesis (`reachable` from ShiftDistances).
inline int OracleTer(const std::map<Seq, int>& reachable, const Seq& ref) {
  int best = 1 << 30;
  for (const auto& [state, shifts] : reachable) {
    if (shifts >= best) continue;
    best = std::min(best, shifts + OracleLevenshtein(state, ref));
  }
  return best;
}

}  // namespace paravat::testing

#endif  // PARAVAT_TESTS_TER_ORACLE_HPP_
