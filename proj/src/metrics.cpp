#include "bass/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <iomanip>

namespace bass {

int lcs_length(const TokenList& a, const TokenList& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return 0;
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

namespace {

RougeScore from_counts(double overlap, double hyp_count, double ref_count) {
    RougeScore s;
    s.precision = hyp_count > 0 ? 100.0 * overlap / hyp_count : 0.0;
    s.recall = ref_count > 0 ? 100.0 * overlap / ref_count : 0.0;
    s.f1 = (s.precision + s.recall) > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

std::map<TokenList, int> ngram_counts(const TokenList& tokens, int n) {
    std::map<TokenList, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[TokenList(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

}  // namespace

RougeScore rouge_n(const TokenList& hyp, const TokenList& ref, int n) {
    if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
    const auto hc = ngram_counts(hyp, n);
    const auto rc = ngram_counts(ref, n);
    double overlap = 0, hyp_total = 0, ref_total = 0;
    for (const auto& [g, c] : hc) {
        hyp_total += c;
        auto it = rc.find(g);
        if (it != rc.end()) overlap += std::min(c, it->second);  // clipped
    }
    for (const auto& [g, c] : rc) ref_total += c;
    return from_counts(overlap, hyp_total, ref_total);
}

RougeScore rouge_l(const TokenList& hyp, const TokenList& ref) {
    const double lcs = lcs_length(hyp, ref);
    return from_counts(lcs, static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
}

CorpusRouge corpus_rouge(const std::vector<TokenList>& hyps, const std::vector<TokenList>& refs) {
    if (hyps.size() != refs.size())
        throw std::invalid_argument("corpus_rouge: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                    std::to_string(refs.size()) + " references");
    if (hyps.empty()) throw std::invalid_argument("corpus_rouge: empty corpus");
    CorpusRouge out;
    auto acc = [](RougeScore& tot, const RougeScore& s) {
        tot.precision += s.precision;
        tot.recall += s.recall;
        tot.f1 += s.f1;
    };
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        acc(out.rouge1, rouge_n(hyps[i], refs[i], 1));
        acc(out.rouge2, rouge_n(hyps[i], refs[i], 2));
        acc(out.rougeL, rouge_l(hyps[i], refs[i]));
    }
    const double n = static_cast<double>(hyps.size());
    for (RougeScore* s : {&out.rouge1, &out.rouge2, &out.rougeL}) {
        s->precision /= n;
        s->recall /= n;
        s->f1 /= n;
    }
    return out;
}

TokenList split_tokens(const std::string& text) {
    TokenList out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string format_rouge_report(const CorpusRouge& scores) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "ROUGE-1 " << scores.rouge1.f1 << "\tROUGE-2 " << scores.rouge2.f1 << "\tROUGE-L " << scores.rougeL.f1;
    return os.str();
}

}  // namespace bass
