#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

namespace mdocr {

// Levenshtein distance with unit costs over any pair of random-access
// sequences whose elements compare with ==. Two-row dynamic program with
// common prefix/suffix trimming.
template <class SeqA, class SeqB>
std::size_t edit_distance(const SeqA& a, const SeqB& b) {
    std::size_t lo = 0;
    std::size_t na = a.size();
    std::size_t nb = b.size();
    while (lo < na && lo < nb && a[lo] == b[lo]) ++lo;
    while (na > lo && nb > lo && a[na - 1] == b[nb - 1]) {
        --na;
        --nb;
    }
    const std::size_t la = na - lo;
    const std::size_t lb = nb - lo;
    if (la == 0) return lb;
    if (lb == 0) return la;

    std::vector<std::size_t> row(lb + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= la; ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= lb; ++j) {
            const std::size_t up = row[j];
            const std::size_t subst = diag + (a[lo + i - 1] == b[lo + j - 1] ? 0 : 1);
            row[j] = std::min({row[j - 1] + 1, up + 1, subst});
            diag = up;
        }
    }
    return row[lb];
}

}  // namespace mdocr
