# ## Corpus ingestion and stratified folds
#
# Loads the three tiny fixture sources shipped with the tests, merges them,
# then builds stratified folds on a synthetic corpus with the full class ratio.

from pathlib import Path

import numpy as np

from abusedetect.corpus import (
    Label,
    load_darkweb,
    load_pan12,
    load_roman_urdu,
    make_synthetic_corpus,
    merge_corpora,
    stratified_kfold,
)

FIX = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# ### Loading each source

dark = load_darkweb(FIX / "darkweb.csv")
pan = load_pan12(FIX / "pan12.xml", FIX / "predators.txt")
urdu = load_roman_urdu(FIX / "roman_urdu.csv")

for name, r in [("darkweb", dark), ("pan12", pan), ("roman urdu", urdu)]:
    print(f"{name:>10}: {len(r.samples)} samples, {len(r.errors)} rejected rows, {len(r.warnings)} warnings")

# rejected rows carry their line number
print(urdu.errors)

# a PAN12 conversation becomes one sample, messages joined by newlines
print(repr(pan.samples[0].text))

# ### Merging

corpus = merge_corpora([dark.samples, pan.samples, urdu.samples])
print([s.id for s in corpus])
print(corpus.stats.to_dict())

# ### Folds at the real class balance

synthetic = make_synthetic_corpus(n=2000, ratio=3.5, seed=1)
folds = stratified_kfold(synthetic, k=5, seed=0)
print("fold sizes", folds.fold_sizes())

y = np.array([s.label is Label.ABUSIVE for s in synthetic])
f = folds.folds(synthetic)
print("abusive share per fold", [round(float(y[f == i].mean()), 4) for i in range(5)])
print("global share", round(float(y.mean()), 4))
print("max deviation", folds.max_share_deviation(synthetic))
