#pragma once

// ROUGE-1/2/L scoring of hypothesis summaries against references,
// scaled to [0,100].

#include <string>
#include <vector>

namespace bass {

using TokenList = std::vector<std::string>;

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

int lcs_length(const TokenList& a, const TokenList& b);

RougeScore rouge_n(const TokenList& hyp, const TokenList& ref, int n);
RougeScore rouge_l(const TokenList& hyp, const TokenList& ref);

struct CorpusRouge {
    RougeScore rouge1, rouge2, rougeL;
};

// Unweighted mean of per-pair scores.
CorpusRouge corpus_rouge(const std::vector<TokenList>& hyps, const std::vector<TokenList>& refs);

TokenList split_tokens(const std::string& text);

// "ROUGE-1 <f>\tROUGE-2 <f>\tROUGE-L <f>", two decimals.
std::string format_rouge_report(const CorpusRouge& scores);

}  // namespace bass
