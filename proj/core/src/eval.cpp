#include "ctrank/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ctrank/error.hpp"

namespace ctrank {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_double(const std::string& text, std::size_t line_no, const char* what) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || std::isnan(v)) {
    throw Error(ErrorCode::MalformedLine,
                "line " + std::to_string(line_no) + ": bad " + what + ": " + text);
  }
  return v;
}

long parse_long(const std::string& text, std::size_t line_no, const char* what) {
  char* end = nullptr;
  long v = std::strtol(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0') {
    throw Error(ErrorCode::MalformedLine,
                "line " + std::to_string(line_no) + ": bad " + what + ": " + text);
  }
  return v;
}

double gain(int grade, bool exponential) {
  if (exponential) return std::pow(2.0, static_cast<double>(grade)) - 1.0;
  return static_cast<double>(grade);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

Qrels Qrels::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open qrels file: " + path.string());
  }
  Qrels out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != 4) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": expected 4 columns, got " +
                      std::to_string(cols.size()));
    }
    long grade = parse_long(cols[3], line_no, "grade");
    if (grade < 0 || grade > 2) {
      throw Error(ErrorCode::GradeOutOfRange,
                  "line " + std::to_string(line_no) + ": grade " + cols[3] + " outside {0,1,2}");
    }
    auto& docs = out.topics_[cols[0]];
    if (!docs.emplace(cols[2], static_cast<int>(grade)).second) {
      throw Error(ErrorCode::DuplicatePair,
                  "line " + std::to_string(line_no) + ": (" + cols[0] + ", " + cols[2] + ") repeated");
    }
    ++out.pairs_;
  }
  return out;
}

void Qrels::add(const std::string& topic_id, const std::string& doc_id, int grade) {
  if (grade < 0 || grade > 2) {
    throw Error(ErrorCode::GradeOutOfRange, "grade " + std::to_string(grade) + " outside {0,1,2}");
  }
  if (!topics_[topic_id].emplace(doc_id, grade).second) {
    throw Error(ErrorCode::DuplicatePair, "(" + topic_id + ", " + doc_id + ") repeated");
  }
  ++pairs_;
}

std::optional<int> Qrels::grade(const std::string& topic_id, const std::string& doc_id) const {
  auto it = topics_.find(topic_id);
  if (it == topics_.end()) return std::nullopt;
  auto doc = it->second.find(doc_id);
  if (doc == it->second.end()) return std::nullopt;
  return doc->second;
}

bool Qrels::has_topic(const std::string& topic_id) const {
  return topics_.find(topic_id) != topics_.end();
}

std::size_t Qrels::size() const noexcept { return pairs_; }

RunMap read_run(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open run file: " + path.string());
  }
  RunMap out;
  std::string current_topic;
  std::set<std::string> current_docs;
  long expected_rank = 1;
  double previous_score = 0.0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != 6) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": expected 6 columns, got " +
                      std::to_string(cols.size()));
    }
    const std::string& topic = cols[0];
    const std::string& doc = cols[2];
    long rank = parse_long(cols[3], line_no, "rank");
    double score = parse_double(cols[4], line_no, "score");

    if (topic != current_topic) {
      if (out.count(topic) > 0) {
        throw Error(ErrorCode::MalformedLine,
                    "line " + std::to_string(line_no) + ": topic " + topic +
                        " reappears after another topic (runs must be grouped by topic)");
      }
      current_topic = topic;
      current_docs.clear();
      expected_rank = 1;
    }
    if (rank != expected_rank) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": rank " + std::to_string(rank) +
                      " but expected " + std::to_string(expected_rank));
    }
    if (expected_rank > 1 && score > previous_score) {
      throw Error(ErrorCode::NonMonotoneScores,
                  "topic " + topic + ": score rises at rank " + std::to_string(rank));
    }
    if (!current_docs.insert(doc).second) {
      throw Error(ErrorCode::DuplicateDoc, "topic " + topic + ": doc " + doc + " repeated");
    }
    auto& ranking = out[topic];
    ranking.topic_id = topic;
    ranking.entries.push_back({doc, score});
    previous_score = score;
    ++expected_rank;
  }
  return out;
}

void write_run(const std::filesystem::path& path, const RunMap& run, const std::string& tag) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write run file: " + path.string());
  }
  for (const auto& [topic, ranking] : run) {
    std::set<std::string> docs;
    std::size_t rank = 1;
    for (const auto& e : ranking.entries) {
      if (rank > 1 && e.score > ranking.entries[rank - 2].score) {
        throw Error(ErrorCode::NonMonotoneScores,
                    "topic " + topic + ": refusing to write rising scores at rank " +
                        std::to_string(rank));
      }
      if (!docs.insert(e.doc_id).second) {
        throw Error(ErrorCode::DuplicateDoc, "topic " + topic + ": doc " + e.doc_id + " repeated");
      }
      out << topic << " Q0 " << e.doc_id << ' ' << rank << ' ' << format_double(e.score) << ' '
          << tag << '\n';
      ++rank;
    }
  }
  if (!out) {
    throw Error(ErrorCode::Io, "failed writing run file: " + path.string());
  }
}

double ndcg_at_k(const Ranking& run, const Qrels& qrels, std::size_t k, bool exponential_gain) {
  auto topic = qrels.by_topic().find(run.topic_id);
  if (topic == qrels.by_topic().end()) {
    throw Error(ErrorCode::TopicNotInQrels, "topic " + run.topic_id + " is not judged");
  }
  double dcg = 0.0;
  const std::size_t depth = std::min(k, run.entries.size());
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = topic->second.find(run.entries[i].doc_id);
    int grade = it == topic->second.end() ? 0 : it->second;
    dcg += gain(grade, exponential_gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> grades;
  grades.reserve(topic->second.size());
  for (const auto& [doc, grade] : topic->second) grades.push_back(grade);
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    idcg += gain(grades[i], exponential_gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  if (idcg == 0.0) return 0.0;
  return dcg / idcg;
}

double precision_at_k(const Ranking& run, const Qrels& qrels, std::size_t k, int rel_threshold) {
  auto topic = qrels.by_topic().find(run.topic_id);
  if (topic == qrels.by_topic().end()) {
    throw Error(ErrorCode::TopicNotInQrels, "topic " + run.topic_id + " is not judged");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, run.entries.size()); ++i) {
    auto it = topic->second.find(run.entries[i].doc_id);
    if (it != topic->second.end() && it->second >= rel_threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> recall_at_k(const Ranking& run, const Qrels& qrels, std::size_t k,
                                  int rel_threshold) {
  auto topic = qrels.by_topic().find(run.topic_id);
  if (topic == qrels.by_topic().end()) {
    throw Error(ErrorCode::TopicNotInQrels, "topic " + run.topic_id + " is not judged");
  }
  std::size_t total_relevant = 0;
  for (const auto& [doc, grade] : topic->second) {
    if (grade >= rel_threshold) ++total_relevant;
  }
  if (total_relevant == 0) return std::nullopt;
  std::size_t retrieved = 0;
  for (std::size_t i = 0; i < std::min(k, run.entries.size()); ++i) {
    auto it = topic->second.find(run.entries[i].doc_id);
    if (it != topic->second.end() && it->second >= rel_threshold) ++retrieved;
  }
  return static_cast<double>(retrieved) / static_cast<double>(total_relevant);
}

std::vector<MetricResult> evaluate_run(const RunMap& run, const Qrels& qrels,
                                       const EvalOptions& opts) {
  MetricResult ndcg{"ndcg@" + std::to_string(opts.ndcg_k), {}, 0.0, {}};
  MetricResult precision{"p@" + std::to_string(opts.precision_k), {}, 0.0, {}};
  MetricResult recall{"recall@" + std::to_string(opts.recall_k), {}, 0.0, {}};

  for (const auto& [topic_id, judged_docs] : qrels.by_topic()) {
    auto it = run.find(topic_id);
    Ranking empty;
    empty.topic_id = topic_id;
    if (it == run.end() && !opts.complete_judgments) continue;
    const Ranking& ranking = it != run.end() ? it->second : empty;

    ndcg.per_topic[topic_id] = ndcg_at_k(ranking, qrels, opts.ndcg_k, opts.exponential_gain);
    precision.per_topic[topic_id] =
        precision_at_k(ranking, qrels, opts.precision_k, opts.rel_threshold);
    auto r = recall_at_k(ranking, qrels, opts.recall_k, opts.rel_threshold);
    if (r) {
      recall.per_topic[topic_id] = *r;
    } else {
      recall.skipped_topics.push_back(topic_id);
    }
  }
  for (MetricResult* m : {&ndcg, &precision, &recall}) {
    double sum = 0.0;
    for (const auto& [topic, value] : m->per_topic) sum += value;
    m->mean = m->per_topic.empty() ? 0.0 : sum / static_cast<double>(m->per_topic.size());
  }
  return {std::move(ndcg), std::move(precision), std::move(recall)};
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;

  // Lentz's continued fraction for I_x(a,b).
  auto betacf = [](double aa, double bb, double xx) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-14;
    constexpr double kTiny = 1e-300;
    double qab = aa + bb;
    double qap = aa + 1.0;
    double qam = aa - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * xx / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
      double m2 = 2.0 * m;
      double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
      d = 1.0 + num * d;
      if (std::fabs(d) < kTiny) d = kTiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < kTiny) c = kTiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
      d = 1.0 + num * d;
      if (std::fabs(d) < kTiny) d = kTiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < kTiny) c = kTiny;
      d = 1.0 / d;
      double delta = d * c;
      h *= delta;
      if (std::fabs(delta - 1.0) < kEps) break;
    }
    return h;
  };

  double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                     b * std::log1p(-x);
  double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

double paired_t_test(const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b) {
  std::vector<double> diffs;
  for (const auto& [topic, value] : a) {
    auto it = b.find(topic);
    if (it != b.end()) diffs.push_back(value - it->second);
  }
  if (diffs.size() < 2) {
    throw Error(ErrorCode::InsufficientTopics,
                "paired t-test needs >= 2 shared topics, got " + std::to_string(diffs.size()));
  }
  const double n = static_cast<double>(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    return mean == 0.0 ? 1.0 : 0.0;
  }
  double t = mean / (sd / std::sqrt(n));
  return student_t_two_sided_p(t, n - 1.0);
}

SignificanceMatrix significance_matrix(const std::vector<RunMetrics>& runs) {
  SignificanceMatrix out;
  if (runs.empty()) return out;
  const std::size_t metric_count = runs.front().metrics.size();
  for (std::size_t m = 0; m < metric_count; ++m) {
    const std::string& metric = runs.front().metrics[m].metric;
    auto& cells = out.p_values[metric];
    for (const auto& ra : runs) {
      for (const auto& rb : runs) {
        if (ra.name == rb.name) {
          cells[{ra.name, rb.name}] = 1.0;
          continue;
        }
        double p = paired_t_test(ra.metrics[m].per_topic, rb.metrics[m].per_topic);
        cells[{ra.name, rb.name}] = p;
      }
    }
  }
  return out;
}

std::string format_significance_report(const std::vector<RunMetrics>& runs,
                                       const SignificanceMatrix& matrix, double alpha) {
  std::ostringstream out;
  out << "# paired Student's t-test, p <= " << alpha
      << "; superscript letters denote runs beaten significantly\n";
  char letter = 'a';
  for (const auto& run : runs) {
    out << "  (" << letter << ") " << run.name << '\n';
    ++letter;
  }
  out << '\n';

  if (runs.empty()) return out.str();
  out << "run";
  for (const auto& metric : runs.front().metrics) {
    out << '\t' << metric.metric;
  }
  out << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out << '(' << static_cast<char>('a' + i) << ") " << runs[i].name;
    for (std::size_t m = 0; m < runs[i].metrics.size(); ++m) {
      const auto& metric_name = runs[i].metrics[m].metric;
      std::string beats;
      for (std::size_t j = 0; j < runs.size(); ++j) {
        if (i == j) continue;
        auto metric_cells = matrix.p_values.find(metric_name);
        if (metric_cells == matrix.p_values.end()) continue;
        auto cell = metric_cells->second.find({runs[i].name, runs[j].name});
        if (cell == metric_cells->second.end()) continue;
        if (cell->second <= alpha && runs[i].metrics[m].mean > runs[j].metrics[m].mean) {
          beats.push_back(static_cast<char>('a' + j));
        }
      }
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", runs[i].metrics[m].mean);
      out << '\t' << buf;
      if (!beats.empty()) out << '^' << beats;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::pair<std::string, double>> per_query_deltas(const MetricResult& a,
                                                             const MetricResult& b) {
  if (a.metric != b.metric) {
    throw Error(ErrorCode::MetricMismatch, "'" + a.metric + "' vs '" + b.metric + "'");
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [topic, value] : a.per_topic) {
    auto it = b.per_topic.find(topic);
    if (it != b.per_topic.end()) out.emplace_back(topic, it->second - value);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  return out;
}

void write_deltas_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, double>>& deltas) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write deltas file: " + path.string());
  }
  out << "topic_id,delta\n";
  for (const auto& [topic, delta] : deltas) {
    out << topic << ',' << format_double(delta) << '\n';
  }
  if (!out) {
    throw Error(ErrorCode::Io, "failed writing deltas file: " + path.string());
  }
}

}  // namespace ctrank
