#!/usr/bin/env python3
"""Regenerate the deterministic test fixtures under tests/fixtures/.

Everything is seeded, so reruns are byte-identical. The expected metric values
are computed here with an independent implementation of the trec_eval
measures (ndcg_cut with linear gains, P@k, recall@k, -c averaging over judged
topics, binarized qrels for the binary measures); the t-test reference table
comes from scipy.stats.ttest_rel.
"""

import json
import math
import os
import random

from scipy import stats

HERE = os.path.dirname(os.path.abspath(__file__))
FIX = os.path.normpath(os.path.join(HERE, "..", "tests", "fixtures"))

THEMES = [
    ("diabetes", ["diabetes", "metformin", "glycemic", "insulin", "hba1c", "hyperglycemia"]),
    ("asthma", ["asthma", "inhaled", "corticosteroid", "bronchodilator", "wheezing", "spirometry"]),
    ("hypertension", ["hypertension", "blood", "pressure", "amlodipine", "systolic", "diastolic"]),
    ("migraine", ["migraine", "headache", "aura", "triptan", "photophobia", "prophylaxis"]),
    ("melanoma", ["melanoma", "immunotherapy", "nivolumab", "metastatic", "braf", "lesion"]),
    ("arthritis", ["arthritis", "rheumatoid", "methotrexate", "joint", "synovitis", "stiffness"]),
    ("depression", ["depression", "antidepressant", "sertraline", "mood", "anhedonia", "psychotherapy"]),
    ("hepatitis", ["hepatitis", "antiviral", "cirrhosis", "fibrosis", "viral", "transaminase"]),
    ("epilepsy", ["epilepsy", "seizure", "anticonvulsant", "levetiracetam", "focal", "electroencephalogram"]),
    ("anemia", ["anemia", "hemoglobin", "ferritin", "transfusion", "fatigue", "erythropoietin"]),
]

FILLER = (
    "this multicenter study enrolls adult participants who provide informed consent and will "
    "attend scheduled visits over the treatment period with safety monitoring and laboratory "
    "assessments performed at baseline and follow up"
).split()

AGES = [34, 41, 47, 52, 54, 58, 61, 63, 67, 72]
SEXES = ["woman", "man", "woman", "man", "woman", "man", "woman", "man", "woman", "man"]


def doc_id(n):
    return "NCT%04d" % n


def filler(rng, n):
    return " ".join(rng.choice(FILLER) for _ in range(n))


def make_corpus_and_qrels():
    rng = random.Random(20230901)
    docs = []
    qrels = []  # (topic, doc, grade)
    for t, (condition, terms) in enumerate(THEMES):
        topic_id = str(t + 1)
        for i in range(10):
            n = t * 10 + i + 1
            did = doc_id(n)
            drug = terms[1]
            if i < 4:
                grade = 2
            elif i < 7:
                grade = 1
            else:
                grade = 0
            qrels.append((topic_id, did, grade))

            if grade == 2:
                # lexically modest: the condition appears once or twice, the
                # medication never; most theme terms live outside the query
                title = "%s randomized study of %s in adults" % (did, terms[3])
                elig = (
                    "Inclusion: adults aged 30 to 75 with %s confirmed by a specialist. "
                    "Exclusion: pregnancy or severe renal impairment." % condition
                )
                summary = "Evaluates %s and %s response. %s" % (
                    terms[3], terms[5], filler(rng, 8))
                detail = "%s %s cohort with scheduled response assessments. %s" % (
                    terms[5], terms[2], filler(rng, 12))
            elif grade == 1:
                title = "%s controlled trial of %s therapy" % (did, terms[3])
                elig = (
                    "Inclusion: adults with %s. Exclusion: prior treatment with %s, "
                    "uncontrolled comorbidity, or enrollment in another trial." % (condition, drug)
                )
                summary = "Studies %s outcomes under strict exclusion criteria. %s" % (
                    terms[5], filler(rng, 8))
                detail = "%s cohort with narrow criteria. %s" % (terms[2], filler(rng, 12))
            else:
                # term-stuffed distractor against topic (t + 3): repeats that
                # topic's condition and medication words in a short document
                target = THEMES[(t + 3) % 10]
                tcond, tterms = target[0], target[1]
                title = "%s %s registry of %s and %s burden" % (did, tcond, tcond, tterms[1])
                elig = "Inclusion: healthy volunteers. Exclusion: none."
                summary = "Registry of %s %s and %s with %s screening and %s diaries." % (
                    tcond, tterms[1], tcond, tterms[1], tcond)
                detail = "%s registry notes %s %s follow up." % (tcond, tterms[1], condition)
            docs.append({
                "doc_id": did,
                "title": title,
                "eligibility": elig,
                "summary": summary,
                "detail": detail,
            })

    topics = []
    for t, (condition, terms) in enumerate(THEMES):
        topic_id = str(t + 1)
        text = (
            "The patient is a %d year old %s with %s who has been managed with %s but reports "
            "ongoing %s symptoms. Recent assessment noted %s and %s. The patient is seeking "
            "enrollment in an interventional study for %s."
            % (AGES[t], SEXES[t], condition, terms[1], condition, terms[2], terms[4], condition)
        )
        topics.append((topic_id, text))
    return docs, qrels, topics


def write_corpus(docs):
    with open(os.path.join(FIX, "corpus.jsonl"), "w") as f:
        for d in docs:
            f.write(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n")


def write_qrels(qrels):
    with open(os.path.join(FIX, "qrels.txt"), "w") as f:
        for topic, doc, grade in qrels:
            f.write("%s 0 %s %d\n" % (topic, doc, grade))


def write_topics(topics):
    with open(os.path.join(FIX, "topics_free.xml"), "w") as f:
        f.write("<topics>\n")
        for topic_id, text in topics:
            f.write('  <topic number="%s">%s</topic>\n' % (topic_id, text))
        f.write("</topics>\n")


def write_template_topics(topics):
    # questionnaire-style XML versions of the same patients, with blanks
    with open(os.path.join(FIX, "topics_template.xml"), "w") as f:
        f.write("<topics>\n")
        for t, (topic_id, _text) in enumerate(topics):
            condition, terms = THEMES[t]
            f.write('  <topic number="%s">\n' % topic_id)
            f.write("    <age>%d</age>\n" % AGES[t])
            f.write("    <sex>%s</sex>\n" % SEXES[t])
            f.write("    <conditions>%s with ongoing symptoms</conditions>\n" % condition)
            f.write("    <medications>%s</medications>\n" % terms[1])
            f.write("    <findings>%s and %s</findings>\n" % (terms[2], terms[4]))
            f.write("    <allergies></allergies>\n")
            f.write("    <notes></notes>\n")
            f.write("  </topic>\n")
        f.write("</topics>\n")


def grade_of(qrels_map, topic, doc):
    return qrels_map.get((topic, doc), 0)


def make_vectors(qrels_map):
    rng = random.Random(777)
    dim = 16
    doc_emb = []
    topic_emb = []
    doc_sparse = []
    topic_sparse = []
    for t, (condition, terms) in enumerate(THEMES):
        topic_id = str(t + 1)
        q = [0.0] * dim
        q[t] = 1.0
        q[10 + t % 6] = 0.25
        q = [round(v + rng.uniform(-0.02, 0.02), 6) for v in q]
        topic_emb.append({"id": topic_id, "vector": q})
        tvec = {term: round(1.0 + 0.1 * j, 4) for j, term in enumerate(terms[:4])}
        topic_sparse.append({"id": topic_id, "vector": tvec})

    for t, (condition, terms) in enumerate(THEMES):
        topic_id = str(t + 1)
        for i in range(10):
            did = doc_id(t * 10 + i + 1)
            g = grade_of(qrels_map, topic_id, did)
            hard_eligible = g == 2 and i == 3  # one relevant trial the encoders miss
            if hard_eligible:
                align = 0.45 + rng.uniform(0.0, 0.1)
            elif g == 2:
                align = 0.72 + rng.uniform(0.0, 0.22)
            elif g == 1:
                align = 0.55 + rng.uniform(0.0, 0.22)
            else:
                align = 0.10 + rng.uniform(0.0, 0.25)
            v = [rng.uniform(-0.03, 0.03) for _ in range(dim)]
            v[t] += align
            v[10 + t % 6] += 0.25 * align
            v[(t + 5) % 10] += rng.uniform(0.0, 0.05)
            v = [round(x, 6) for x in v]
            doc_emb.append({"id": did, "vector": v})

            sv = {}
            if hard_eligible:
                for j, term in enumerate(terms[:3]):
                    sv[term] = round(0.5 + 0.08 * j + rng.uniform(0.0, 0.2), 4)
            elif g == 2:
                for j, term in enumerate(terms[:5]):
                    sv[term] = round(1.0 + 0.12 * j + rng.uniform(0.0, 0.5), 4)
            elif g == 1:
                for j, term in enumerate(terms[:4]):
                    sv[term] = round(0.72 + 0.1 * j + rng.uniform(0.0, 0.45), 4)
            else:
                other = THEMES[(t + 3) % 10][1]
                sv[other[0]] = round(0.35 + rng.uniform(0.0, 0.2), 4)
                sv[other[1]] = round(0.3 + rng.uniform(0.0, 0.2), 4)
                sv[terms[0]] = round(0.15 + rng.uniform(0.0, 0.1), 4)
            sv["patient"] = round(0.05 + rng.uniform(0.0, 0.05), 4)
            doc_sparse.append({"id": did, "vector": sv})

    def dump_jsonl(path, rows):
        with open(path, "w") as f:
            for r in rows:
                f.write(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n")

    dump_jsonl(os.path.join(FIX, "doc_embeddings.jsonl"), doc_emb)
    dump_jsonl(os.path.join(FIX, "topic_embeddings.jsonl"), topic_emb)
    dump_jsonl(os.path.join(FIX, "doc_sparse_vectors.jsonl"), doc_sparse)
    dump_jsonl(os.path.join(FIX, "topic_sparse_vectors.jsonl"), topic_sparse)


def make_ce_scores(qrels_map):
    rng = random.Random(4242)
    with open(os.path.join(FIX, "ce_scores.tsv"), "w") as f:
        for t in range(10):
            topic_id = str(t + 1)
            for n in range(1, 101):
                did = doc_id(n)
                g = grade_of(qrels_map, topic_id, did)
                score = g * 5.0 + rng.uniform(0.0, 1.5)
                f.write("%s\t%s\t%.4f\n" % (topic_id, did, score))


def make_shots():
    description = (
        "The patient is a 49 year old woman with persistent asthma on daily inhaled "
        "corticosteroids who continues to report wheezing at night."
    )
    shots = [
        {
            "description": description,
            "trial": (
                "Title: Step-up bronchodilator study Eligibility: Inclusion: adults with asthma. "
                "Exclusion: current inhaled corticosteroid use. Summary: add-on therapy trial "
                "Description: randomized add-on bronchodilator evaluation"
            ),
            "label": 1,
        },
        {
            "description": description,
            "trial": (
                "Title: Biologic asthma trial Eligibility: Inclusion: adults with persistent "
                "asthma despite inhaled corticosteroids. Exclusion: smoking history. Summary: "
                "anti-inflammatory biologic Description: multicenter biologic efficacy study"
            ),
            "label": 2,
        },
        {
            "description": description,
            "trial": (
                "Title: Melanoma immunotherapy registry Eligibility: Inclusion: adults with "
                "metastatic melanoma. Exclusion: none. Summary: observational immunotherapy "
                "registry Description: long term outcomes registry"
            ),
            "label": 0,
        },
    ]
    with open(os.path.join(FIX, "shots.json"), "w") as f:
        json.dump(shots, f, indent=2)
        f.write("\n")


def apply_filter_rule(text):
    """The generation filter: refusal keywords, case-insensitive, then length."""
    lowered = text.lower()
    for kw in ("sorry", "i cannot generate", "ai language model"):
        if kw in lowered:
            return False, "keyword:" + kw
    if len(text) < 30:
        return False, "too_short"
    return True, None


def make_filter_cases():
    texts = [
        "Sorry, I can't help with that request today.",
        "I am SORRY but no.",
        "sorry",
        "SoRrY, generating this would not be appropriate.",
        "We are sorry to inform you that this is unavailable.",
        "The committee was sorrydale about the outcome of it.",
        "I'm sorry, but I can't help",
        "Unfortunately I must decline. Sorry about that, truly.",
        "sOrRy -- the requested description cannot be produced.",
        "A sincere apology: SORRY.",
        "I CANNOT GENERATE that content for you under any policy.",
        "i cannot generate a description",
        "Regrettably, I cannot generate the requested patient text.",
        "I Cannot Generate anything matching this clinical trial.",
        "As stated, i CANNOT generate this.",
        "The system replied: 'I cannot generate that material.'",
        "i cannot GENERATE descriptions of this kind at all.",
        "Response was B: I cannot generate the data requested.",
        "As an AI language model, I do not produce medical advice.",
        "ai LANGUAGE model limitations prevent a useful answer here.",
        "Being an Ai LaNgUaGe MoDeL, no description follows.",
        "AI language model output refused for this kind of request.",
        "This is an ai language model refusal notice for the task.",
        "Note: the AI Language Model declined to fill the template.",
        "An AI LANGUAGE MODEL cannot act as a trial physician.",
        "I am just an ai language model and cannot help with it.",
        "this string has exactly 29 c.",
        "this string has exactly 30 ch.",
        "this string has exactly 31 chs.",
        "short answer",
        "ok",
        "A 63 year old man with metastatic melanoma previously treated with targeted therapy.",
        "The patient is a 52 year old woman with type 2 diabetes on metformin with rising hba1c.",
        "A 45 year old with persistent asthma despite daily inhaled corticosteroid therapy.",
        "67 year old man with rheumatoid arthritis and inadequate response to methotrexate.",
        "A young adult with newly diagnosed focal epilepsy seeking an anticonvulsant study.",
        "The patient reports chronic migraine with aura occurring twelve days per month.",
        "A 58 year old with chronic hepatitis and early fibrosis on recent elastography.",
        "72 year old woman with iron deficiency anemia and fatigue despite oral ferritin.",
        "Middle aged patient with resistant hypertension on three antihypertensive agents.",
        "A 41 year old man with moderate depression interested in adjunct psychotherapy.",
        "I really cannot generate enthusiasm, yet the patient fits inclusion criteria well.",
        "The AI-language model hyphen case should pass through this particular filter.",
        "sorr y split keyword should be kept since matching is substring based only.",
        "An apology-free description of a 55 year old patient with stable angina history.",
        "Patient previously organized a charity gala; now enrolled for glycemic control.",
        "Adult volunteer with well controlled seizures for two years on monotherapy.",
        "A description exactly matching the inclusion criteria of the sampled trial text.",
        "Generated text mentioning neither refusal phrases nor model self reference.",
        "An elderly patient with stable chronic kidney disease and controlled blood pressure.",
    ]
    assert len(texts[26]) == 29 and len(texts[27]) == 30 and len(texts[28]) == 31, (
        len(texts[26]), len(texts[27]), len(texts[28]))
    cases = []
    for text in texts:
        keep, reason = apply_filter_rule(text)
        cases.append({"text": text, "keep": keep, "reason": reason})
    assert len(cases) == 50, len(cases)
    with open(os.path.join(FIX, "filter_cases.json"), "w") as f:
        json.dump(cases, f, indent=2)
        f.write("\n")


# --- independent implementations of the trec_eval measures -----------------

def ndcg_cut(run_docs, topic_qrels, k):
    dcg = 0.0
    for i, doc in enumerate(run_docs[:k]):
        g = topic_qrels.get(doc, 0)
        dcg += g / math.log2(i + 2)
    ideal = sorted(topic_qrels.values(), reverse=True)
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
    return dcg / idcg if idcg > 0 else 0.0


def p_at_k(run_docs, topic_qrels, k, threshold):
    hits = sum(1 for doc in run_docs[:k] if topic_qrels.get(doc, 0) >= threshold)
    return hits / k


def recall_at_k(run_docs, topic_qrels, k, threshold):
    total = sum(1 for g in topic_qrels.values() if g >= threshold)
    if total == 0:
        return None
    got = sum(1 for doc in run_docs[:k] if topic_qrels.get(doc, 0) >= threshold)
    return got / total


def make_eval_fixture(qrels):
    qrels_by_topic = {}
    for topic, doc, grade in qrels:
        qrels_by_topic.setdefault(topic, {})[doc] = grade

    rng = random.Random(99)
    runs = {}
    # run_a: weak and shallow — relevant docs scattered, some not retrieved
    # run_b: strong and deep — graded docs mostly first
    for name, quality, depth in (("run_a", 0.15, 12), ("run_b", 0.9, 30)):
        run = {}
        for topic, docs in qrels_by_topic.items():
            judged = sorted(docs.keys())
            unjudged = [doc_id(n) for n in range(1, 101) if doc_id(n) not in docs]
            rng.shuffle(unjudged)
            pool = judged + unjudged[:20]

            def key(doc):
                g = docs.get(doc, 0)
                return quality * g + rng.uniform(0.0, 1.2)

            ordered = sorted(pool, key=key, reverse=True)
            run[topic] = ordered[:depth]
        runs[name] = run

    expected = {}
    for name, run in runs.items():
        path = os.path.join(FIX, "eval", name + ".txt")
        with open(path, "w") as f:
            for topic in sorted(run.keys()):
                score = 100.0
                for rank, doc in enumerate(run[topic], start=1):
                    score -= 0.25
                    f.write("%s Q0 %s %d %s %s\n" % (topic, doc, rank, repr(round(score, 4)), name))
        metrics = {"ndcg@10": {}, "p@10": {}, "recall@1000": {}}
        for topic, docs in qrels_by_topic.items():
            rd = run[topic]
            metrics["ndcg@10"][topic] = ndcg_cut(rd, docs, 10)
            metrics["p@10"][topic] = p_at_k(rd, docs, 10, 2)
            r = recall_at_k(rd, docs, 1000, 2)
            if r is not None:
                metrics["recall@1000"][topic] = r
        expected[name] = {
            m: {
                "per_topic": {t: round(v, 10) for t, v in vals.items()},
                "mean": round(sum(vals.values()) / len(vals), 10),
            }
            for m, vals in metrics.items()
        }
    with open(os.path.join(FIX, "eval", "expected_metrics.json"), "w") as f:
        json.dump(expected, f, indent=2, sort_keys=True)
        f.write("\n")


def make_ttest_cases():
    rng = random.Random(31415)
    cases = []
    sizes = [3, 4, 5, 6, 7, 8, 9, 11, 13, 16, 21, 26, 31, 41, 51, 61, 71, 81, 91, 101]
    for n in sizes:
        a = [round(rng.uniform(0.0, 1.0), 6) for _ in range(n)]
        # keep differences non-degenerate but sometimes subtle
        shift = rng.choice([0.0, 0.01, 0.05, 0.1])
        b = [round(min(1.0, max(0.0, x + rng.gauss(shift, 0.08))), 6) for x in a]
        t, p = stats.ttest_rel(a, b)
        assert not math.isnan(p), (n, a, b)
        cases.append({"df": n - 1, "a": a, "b": b, "t": float(t), "p": float(p)})
    with open(os.path.join(FIX, "eval", "ttest_cases.json"), "w") as f:
        json.dump(cases, f, indent=2)
        f.write("\n")


def make_pairs(qrels, topics):
    topic_text = dict(topics)
    with open(os.path.join(FIX, "human_pairs.jsonl"), "w") as f:
        for topic, doc, grade in qrels:
            if grade >= 2:
                row = {
                    "query_id": topic,
                    "query_text": topic_text[topic],
                    "positive_doc_id": doc,
                    "origin": "human",
                }
                f.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
    rng = random.Random(606)
    with open(os.path.join(FIX, "synthetic_pairs.jsonl"), "w") as f:
        for i in range(12):
            t = rng.randrange(10)
            condition, terms = THEMES[t]
            row = {
                "query_id": "syn-%03d" % i,
                "query_text": "Synthetic %d year old patient with %s managed with %s seeking a trial."
                % (rng.choice(AGES), condition, terms[1]),
                "positive_doc_id": doc_id(t * 10 + rng.randrange(10) + 1),
                "origin": "synthetic",
            }
            f.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def main():
    os.makedirs(FIX, exist_ok=True)
    os.makedirs(os.path.join(FIX, "eval"), exist_ok=True)
    docs, qrels, topics = make_corpus_and_qrels()
    qrels_map = {(t, d): g for t, d, g in qrels}
    write_corpus(docs)
    write_qrels(qrels)
    write_topics(topics)
    write_template_topics(topics)
    make_vectors(qrels_map)
    make_ce_scores(qrels_map)
    make_shots()
    make_filter_cases()
    make_eval_fixture(qrels)
    make_ttest_cases()
    make_pairs(qrels, topics)
    print("fixtures written to", FIX)


if __name__ == "__main__":
    main()
