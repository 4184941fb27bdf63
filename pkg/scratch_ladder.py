"""Scratch: verify the SecCov divergence ladder on the synthetic corpus."""
import sys
import time
from pathlib import Path

import numpy as np

from gralc import synth, pipeline
from gralc.bench import generate_questions
from gralc.docgraph import parse_jats, extract_condition, Condition, imrad_filter
from gralc.embed import deterministic_embedder, embed_query
from gralc.evaluate import sec_cov_at_k, mrr, recall_at_k, cs_recall_at_k
from gralc.kg import link_entities, link_text, load_dictionary, load_concept_graph
from gralc.retrieval import Query, dense_retrieve

t0 = time.time()
out = Path(sys.argv[1] if len(sys.argv) > 1 else "/tmp/ladder")
n_docs = int(sys.argv[2]) if len(sys.argv) > 2 else 18
dim = int(sys.argv[3]) if len(sys.argv) > 3 else 1024

settings = synth.SynthSettings(n_docs=n_docs)
if not (out / "corpus.json").exists():
    print("generating corpus...", flush=True)
    synth.generate_corpus(out, settings)

docs = []
for p in sorted((out / "xml").glob("*.xml")):
    doc = parse_jats(p.read_bytes(), p.stem)
    assert imrad_filter(doc), f"{p.stem} fails imrad"
    docs.append(extract_condition(doc, Condition.FULLTEXT))
base_docs = [parse_jats(p.read_bytes(), p.stem) for p in sorted((out / "xml").glob("*.xml"))]
print(f"{len(docs)} docs, {len(docs[0].token_stream)} tokens each; parse t={time.time()-t0:.1f}s", flush=True)

dictionary = load_dictionary(out / "dictionary.tsv")
cgraph = load_concept_graph(out / "concepts.tsv")
ps = pipeline.PipelineSettings(
    provider=pipeline.ProviderSpec(kind="deterministic", seed=0, dim=dim, context_radius=2),
)
provider = pipeline.make_provider(ps)
resources = pipeline.KgResources(concept_graph=cgraph, dictionary=dictionary)

questions = []
for doc in base_docs:
    mentions = link_entities(doc, dictionary)
    questions.extend(generate_questions(doc, mentions, max_per_template=1))
print(f"{len(questions)} questions; templates:",
      {t: sum(q.template == t for q in questions) for t in set(q.template for q in questions)}, flush=True)

gold = {q.question_id: q.gold_doc_id for q in questions}
queries = [Query(q.question_id, embed_query(q.text, provider),
                 tuple(m.cui for m in link_text(q.text, dictionary)))
           for q in questions]

for strategy in ("naive", "semantic", "late", "structure"):
    t1 = time.time()
    index = pipeline.index_corpus(docs, strategy, ps, provider, resources)
    t2 = time.time()
    results = [dense_retrieve(q, index, k=20) for q in queries]
    line = f"{strategy:10s} chunks={len(index):6d} idx={t2-t1:5.1f}s "
    for k in (1, 3, 5, 10, 20):
        line += f" SC@{k}={sec_cov_at_k(results, k):.2f}"
    line += f"  MRR={mrr(results, gold):.3f} R@5={recall_at_k(results, gold, 5):.3f}"
    line += f" CS@20={cs_recall_at_k(results, questions, 20):.3f}"
    print(line, flush=True)

    if strategy in ("naive", "structure"):
        # diagnostics: label mix of top-20 for the first few queries
        for res in results[:3]:
            labels = [e.section[:12] for e in res.entries[:10]]
            scores = [f"{e.score:.3f}" for e in res.entries[:10]]
            print("   ", res.query_id, list(zip(labels, scores))[:10], flush=True)
print(f"total {time.time()-t0:.1f}s")
