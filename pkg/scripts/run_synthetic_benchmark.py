# File: scripts/run_synthetic_benchmark.py
"""
Generates the synthetic benchmark corpora (easy and hard verb sharing),
trains both parser levels on each and prints the held-out scores.

Corpora land in the configured data directory; each run's models and score
JSON go to models/<easy|hard>/.
"""
import os
import sys

# --- Setup Project Root Path ---
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from src.annotation.bracket_io import write_corpus
from src.config_loader import config_section
from src.corpus.synth import SynthConfig, generate, sharing_pairs
from src.modeling.train import MODELS_DIR, train_and_save_models

DATA_DIR = os.path.join(PROJECT_ROOT, config_section("paths").get("data_dir", "data"))


def run_benchmark(n=None, seed=None):
    results = {}
    for name, hard in (("easy", False), ("hard", True)):
        print(f"\n--- Synthetic benchmark: {name} ---")
        corpus = generate(SynthConfig.from_config(hard_mode=hard), n, seed)
        os.makedirs(DATA_DIR, exist_ok=True)
        corpus_path = os.path.join(DATA_DIR, f"synth_{name}.txt")
        with open(corpus_path, "w", encoding="utf-8", newline="\n") as f:
            write_corpus(corpus, f)
        print(f"Wrote {len(corpus)} utterances to {corpus_path}")

        scores = train_and_save_models(corpus, os.path.join(MODELS_DIR, name))
        action = scores["action"]
        span = scores["entity"]["gold_actions"]["span"]
        print(f"Action accuracy:    {action['accuracy']:.4f}")
        print(f"Action weighted F1: {action['weighted']['f1']:.4f}")
        print(f"Entity span F1:     {span['micro']['f1']:.4f}")

        shared = sharing_pairs()
        labels, matrix = action["confusion"]["labels"], action["confusion"]["matrix"]
        confused = [(labels[i], labels[j], matrix[i][j])
                    for i in range(len(labels)) for j in range(len(labels))
                    if i != j and matrix[i][j] and frozenset((labels[i], labels[j])) in shared]
        if confused:
            print("Confusions between verb-sharing actions:")
            for gold, pred, count in confused:
                print(f"  {gold} -> {pred}: {count}")
        results[name] = scores
    return results


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else None
    run_benchmark(n)
    print("\n--- Process Complete! ---")
