#include "zsmad/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "io_util.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/parallel.hpp"

namespace zsmad {

std::string_view to_string(PromptCategory c) { return c == PromptCategory::Short ? "short" : "long"; }

void PromptBank::validate() const {
    if (pairs.empty()) throw ConstraintError("prompt bank is empty");
    std::set<std::string> ids;
    for (const auto& p : pairs) {
        if (p.id.empty()) throw ConstraintError("prompt pair with an empty id");
        if (!ids.insert(p.id).second) throw ConstraintError(fmt::format("prompt id '{}' is not unique", p.id));
        if (p.bonafide_text.empty() || p.morph_text.empty()) {
            throw ConstraintError(fmt::format("prompt '{}' has an empty text", p.id));
        }
        if (p.bonafide_text == p.morph_text) throw ConstraintError(fmt::format("prompt '{}' has identical texts", p.id));
    }
}

const PromptPair& PromptBank::find(const std::string& id) const {
    for (const auto& p : pairs) {
        if (p.id == id) return p;
    }
    throw ConstraintError(fmt::format("no prompt with id '{}'", id));
}

PromptBank default_prompt_bank() {
    using C = PromptCategory;
    return PromptBank{{
        {"p01", "a photo of a real face", "a photo of a morphed face", C::Short},
        {"p02", "a bona fide face image", "a morphed face image", C::Short},
        {"p03", "a genuine passport photo", "a manipulated passport photo", C::Short},
        {"p04", "an authentic face", "a face morph", C::Short},
        {"p05", "a real person", "a blend of two people", C::Short},
        {"p06", "a genuine passport photo of one person with natural skin texture and consistent facial features",
         "a morphed passport photo blending the faces of two different people with smoothed skin and ghosting artifacts",
         C::Long},
        {"p07", "an unedited frontal face photograph taken by a camera with natural lighting and sharp detail around the eyes",
         "a digitally manipulated frontal face photograph made by combining two faces, with blurred edges around the eyes "
         "and mouth",
         C::Long},
        {"p08", "a bona fide face image of a single subject whose eyes, nose and mouth are consistent with each other",
         "a face morphing attack image whose eyes, nose and mouth are averaged from two different subjects", C::Long},
        {"p09", "a high quality photo of a real human face suitable for an identity document",
         "a synthetic face image generated by a morphing algorithm to fool a face recognition system", C::Long},
        {"p10", "a printed and scanned photo of a real face with natural texture",
         "a printed and scanned photo of a morphed face with unnatural blending artifacts", C::Long},
    }};
}

PromptBank prompt_bank_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("prompt bank: ") + e.what());
    }
    if (!doc.is_array()) throw SchemaError("prompt bank must be a JSON array");
    PromptBank bank;
    for (size_t i = 0; i < doc.size(); ++i) {
        const auto& o = doc[i];
        if (!o.is_object()) throw ParseError(fmt::format("prompt bank entry {}: not an object", i + 1));
        auto field = [&](const char* key) {
            if (!o.contains(key)) throw SchemaError(fmt::format("prompt bank entry {}: missing '{}'", i + 1, key));
            if (!o.at(key).is_string()) throw ParseError(fmt::format("prompt bank entry {}: '{}' must be a string", i + 1, key));
            return o.at(key).get<std::string>();
        };
        PromptPair p{field("id"), field("bonafide_text"), field("morph_text"), PromptCategory::Short};
        const std::string cat = detail::ascii_lower(field("category"));
        if (cat == "long") p.category = PromptCategory::Long;
        else if (cat != "short") throw ParseError(fmt::format("prompt bank entry {}: unknown category '{}'", i + 1, cat));
        bank.pairs.push_back(std::move(p));
    }
    bank.validate();
    return bank;
}

PromptBank load_prompt_bank(const std::filesystem::path& path) { return prompt_bank_from_json(detail::read_file(path)); }

std::string prompt_bank_to_json(const PromptBank& bank) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& p : bank.pairs) {
        doc.push_back({{"id", p.id}, {"bonafide_text", p.bonafide_text}, {"morph_text", p.morph_text},
                       {"category", to_string(p.category)}});
    }
    return doc.dump(2) + "\n";
}

PairProbabilities softmax_pair(double cos_bonafide, double cos_morph, double logit_scale) {
    if (!std::isfinite(cos_bonafide) || !std::isfinite(cos_morph)) throw ConstraintError("cosine similarities must be finite");
    if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) throw ConstraintError("logit scale must be positive and finite");
    const double lb = logit_scale * cos_bonafide;
    const double lm = logit_scale * cos_morph;
    const double mx = std::max(lb, lm);
    const double eb = std::exp(lb - mx);
    const double em = std::exp(lm - mx);
    const double sum = eb + em;
    return {eb / sum, em / sum};
}

PromptEmbeddings embed_prompt(const PromptPair& pair, const EmbeddingModel& model) {
    return {model.encode_text(tokenize(pair.bonafide_text, model.vocab())),
            model.encode_text(tokenize(pair.morph_text, model.vocab()))};
}

ScoreRecord score(const Embedding& image, const PromptPair& pair, const PromptEmbeddings& texts, double logit_scale) {
    ScoreRecord r;
    r.prompt_id = pair.id;
    r.cos_bonafide = dot(image, texts.bonafide);
    r.cos_morph = dot(image, texts.morph);
    const auto p = softmax_pair(r.cos_bonafide, r.cos_morph, logit_scale);
    r.p_bonafide = p.p_bonafide;
    r.p_morph = p.p_morph;
    r.predicted_text = r.cos_morph > r.cos_bonafide ? pair.morph_text : pair.bonafide_text;
    return r;
}

ScoreRecord score(const Embedding& image, const PromptPair& pair, const EmbeddingModel& model) {
    return score(image, pair, embed_prompt(pair, model), model.config().logit_scale);
}

Label classify(double p_morph, double threshold) { return p_morph >= threshold ? Label::Morph : Label::BonaFide; }

Embedding embed_sample(const Manifest& manifest, const FaceSample& sample, const EmbeddingModel& model) {
    return model.encode_image(preprocess(decode(manifest.resolve(sample)), model.config().preprocess()));
}

BankRun run_bank(const Manifest& manifest, const PromptBank& bank, const EmbeddingModel& model, int threads) {
    bank.validate();
    std::vector<PromptEmbeddings> texts;
    texts.reserve(bank.pairs.size());
    for (const auto& pair : bank.pairs) texts.push_back(embed_prompt(pair, model));

    const auto& samples = manifest.samples;
    std::vector<std::optional<Embedding>> images(samples.size());
    std::vector<std::string> failures(samples.size());
    parallel_for(samples.size(), threads, [&](size_t i) {
        try {
            images[i] = embed_sample(manifest, samples[i], model);
        } catch (const Error& e) {
            std::string msg = e.what();
            const std::string resolved = manifest.resolve(samples[i]).string();
            if (msg.starts_with(resolved)) msg = samples[i].path.string() + msg.substr(resolved.size());
            failures[i] = std::move(msg);
        }
    });

    BankRun run;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!images[i]) {
            run.skipped.push_back({samples[i].id, failures[i]});
            continue;
        }
        for (size_t k = 0; k < bank.pairs.size(); ++k) {
            ScoreRecord r = score(*images[i], bank.pairs[k], texts[k], model.config().logit_scale);
            r.sample_id = samples[i].id;
            run.records.push_back(std::move(r));
        }
    }
    std::sort(run.records.begin(), run.records.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
        return std::tie(a.sample_id, a.prompt_id) < std::tie(b.sample_id, b.prompt_id);
    });
    return run;
}

}  // namespace zsmad
