#include "numerate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "numerate/errors.hpp"
#include "numerate/rng.hpp"

namespace numerate::synth {

namespace {

using Kind = ValueDist::Kind;

ValueDist log_uniform(double lo, double hi) {
  ValueDist d;
  d.lo = lo;
  d.hi = hi;
  return d;
}

ValueDist decade(int e) { return log_uniform(text::pow10(e), text::pow10(e + 1)); }

Template one(std::string name, std::string text, ValueDist d) {
  return {std::move(name), std::move(text), 1.0, {{"x", std::move(d)}}};
}

// Three significant digits, truncated, as a plain numeral.
std::string render(double v, double& parsed) {
  const int e = text::exponent_row(v);
  long long m = static_cast<long long>(std::floor(v / std::pow(10.0, e - 2) + 1e-9));
  m = std::clamp(m, 100LL, 999LL);
  std::string digits = std::to_string(m);
  std::string out;
  if (e >= 2) {
    out = digits + std::string(static_cast<std::size_t>(e - 2), '0');
  } else {
    out = digits.substr(0, static_cast<std::size_t>(e + 1)) + "." + digits.substr(static_cast<std::size_t>(e + 1));
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  parsed = std::stod(out);
  return out;
}

double draw(const ValueDist& d, const std::map<std::string, double>& seen, Rng& rng) {
  switch (d.kind) {
    case Kind::LogUniform:
      return std::exp(std::log(d.lo) + uniform01(rng) * (std::log(d.hi) - std::log(d.lo)));
    case Kind::DecadeMixture: {
      const int e = d.decades[uniform_index(rng, d.decades.size())];
      return std::pow(10.0, e + uniform01(rng));
    }
    case Kind::DecadeShift: {
      const int e = text::exponent_row(seen.at(d.of)) + d.shift;
      return std::pow(10.0, e + uniform01(rng));
    }
  }
  return 1.0;
}

void check_template(const Template& t) {
  std::map<std::string, bool> defined;
  for (const auto& [name, d] : t.values) {
    if (d.kind == Kind::DecadeShift && !defined.count(d.of)) {
      throw DataError("template '" + t.name + "': '" + name + "' shifts unknown or later value '" + d.of + "'");
    }
    if (d.kind == Kind::LogUniform && !(d.lo >= 1.0 && d.hi > d.lo && d.hi <= 1e16)) {
      throw DataError("template '" + t.name + "': log-uniform range must satisfy 1 <= lo < hi <= 1e16");
    }
    if (d.kind == Kind::DecadeMixture && d.decades.empty()) {
      throw DataError("template '" + t.name + "': decade mixture needs decades");
    }
    defined[name] = true;
    if (t.text.find("{" + name + "}") == std::string::npos) {
      throw DataError("template '" + t.name + "' has no placeholder {" + name + "}");
    }
  }
  if (!(t.weight > 0)) throw DataError("template '" + t.name + "' needs a positive weight");
}

}  // namespace

std::vector<std::string> preset_names() { return {"contextual8", "bimodal", "linked"}; }

Spec preset(std::string_view name) {
  Spec s;
  if (name == "contextual8") {
    s.templates = {
        one("recipe", "the recipe calls for {x} cups of flour and a pinch of salt .", decade(0)),
        one("school", "the small village school enrolled {x} pupils in the autumn term .", decade(2)),
        one("ship", "the cargo ship carried {x} containers across the pacific ocean last month .", decade(4)),
        one("council", "the local council approved a budget of $ {x} for road repairs this year .", decade(6)),
        one("airline", "the regional airline reported annual revenue of $ {x} for the fiscal year .", decade(8)),
        one("treasury", "the national government borrowed $ {x} to fund its infrastructure programme .", decade(10)),
        one("pension", "the global pension fund manages assets worth $ {x} on behalf of members .", decade(12)),
        one("galaxy", "astronomers estimate the distant galaxy holds about {x} stars in its disk .", decade(14)),
    };
  } else if (name == "bimodal") {
    ValueDist d;
    d.kind = Kind::DecadeMixture;
    d.decades = {2, 8};
    s.templates = {
        one("filing", "the figure reported in the latest filing was {x} according to the company .", d),
        one("period", "analysts noted that the total stood at {x} by the end of the period .", d),
        one("record", "the record shows a count of {x} for the item in question today .", d),
        one("review", "officials said the amount came to {x} when the review was completed .", d),
    };
  } else if (name == "linked") {
    ValueDist a = log_uniform(1.0, 1e14);
    ValueDist b;
    b.kind = Kind::DecadeShift;
    b.of = "a";
    b.shift = 1;
    s.templates = {
        {"forward", "the index moved from {a} in the spring to {b} by the end of the year .", 1.0,
         {{"a", a}, {"b", b}}},
        {"backward", "the tally reached {b} this year after standing at {a} a decade earlier .", 1.0,
         {{"a", a}, {"b", b}}},
    };
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw DataError("unknown synthetic preset '" + std::string(name) + "' (known: " + names + ")");
  }
  return s;
}

Spec parse_spec(std::string_view json) {
  Spec s;
  try {
    const auto j = nlohmann::json::parse(json);
    for (const auto& jt : j.at("templates")) {
      Template t;
      t.name = jt.at("name").get<std::string>();
      t.text = jt.at("text").get<std::string>();
      t.weight = jt.value("weight", 1.0);
      for (auto it = jt.at("values").begin(); it != jt.at("values").end(); ++it) {
        const auto& jd = it.value();
        ValueDist d;
        const auto kind = jd.at("dist").get<std::string>();
        if (kind == "log-uniform") {
          d.lo = jd.at("lo").get<double>();
          d.hi = jd.at("hi").get<double>();
        } else if (kind == "decade") {
          d = decade(jd.at("decade").get<int>());
        } else if (kind == "decade-mixture") {
          d.kind = Kind::DecadeMixture;
          d.decades = jd.at("decades").get<std::vector<int>>();
        } else if (kind == "decade-shift") {
          d.kind = Kind::DecadeShift;
          d.of = jd.at("of").get<std::string>();
          d.shift = jd.value("shift", 1);
        } else {
          throw DataError("template '" + t.name + "': unknown distribution '" + kind + "'");
        }
        t.values.emplace_back(it.key(), d);
      }
      // Shift targets must be sampled before their dependents.
      std::stable_partition(t.values.begin(), t.values.end(),
                            [](const auto& v) { return v.second.kind != Kind::DecadeShift; });
      s.templates.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synthetic spec: ") + e.what());
  }
  if (s.templates.empty()) throw DataError("synthetic spec has no templates");
  return s;
}

std::vector<Document> generate(const Spec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.templates.empty()) throw DataError("synthetic spec has no templates");
  double total = 0.0;
  for (const auto& t : spec.templates) {
    check_template(t);
    total += t.weight;
  }
  Rng rng(mix_seed(seed, 0x5717));
  std::vector<Document> docs;
  docs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = uniform01(rng) * total;
    std::size_t ti = 0;
    while (ti + 1 < spec.templates.size() && u >= spec.templates[ti].weight) u -= spec.templates[ti++].weight;
    const Template& t = spec.templates[ti];

    std::map<std::string, double> seen;
    std::map<std::string, std::string> shown;
    for (const auto& [name, d] : t.values) {
      double v = std::clamp(draw(d, seen, rng), text::kMinValue, 9.99e15);
      double parsed = 0.0;
      shown[name] = render(v, parsed);
      seen[name] = parsed;
    }
    Document doc;
    doc.template_name = t.name;
    for (std::size_t p = 0; p < t.text.size();) {
      if (t.text[p] == '{') {
        const auto close = t.text.find('}', p);
        const std::string key = t.text.substr(p + 1, close - p - 1);
        if (close == std::string::npos || !shown.count(key)) {
          throw DataError("template '" + t.name + "' uses undefined placeholder at offset " + std::to_string(p));
        }
        doc.text += shown[key];
        doc.values.push_back(seen[key]);
        p = close + 1;
      } else {
        doc.text += t.text[p++];
      }
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string documents_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::ordered_json j;
    j["text"] = d.text;
    j["template"] = d.template_name;
    j["values"] = d.values;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<text::NormalizedSentence> normalize(const std::vector<Document>& docs) {
  std::vector<text::NormalizedSentence> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto ss = text::normalize_document(docs[i].text, {}, static_cast<std::int64_t>(i));
    if (ss.size() != 1 || ss[0].numbers.size() != docs[i].values.size()) {
      throw DataError("synthetic document " + std::to_string(i) + " does not normalise to one sentence: " +
                      docs[i].text);
    }
    for (std::size_t k = 0; k < docs[i].values.size(); ++k) {
      if (ss[0].numbers[k].value != docs[i].values[k]) {
        throw DataError("synthetic document " + std::to_string(i) + " parses to a different value");
      }
    }
    out.push_back(std::move(ss[0]));
  }
  return out;
}

}  // namespace numerate::synth
