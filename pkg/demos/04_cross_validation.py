# ## Cross-validating every model kind
#
# Runs 5-fold cross-validation of all seven model kinds on a separable
# synthetic corpus at toy width, then writes the comparison table and the
# pooled ROC plot to ./demo_output.

from pathlib import Path

from abusedetect.corpus import make_synthetic_corpus, stratified_kfold
from abusedetect.eval import cross_validate
from abusedetect.features import make_encoder
from abusedetect.models import set_reproducible, toy_config
from abusedetect.report import format_table, plot_roc, summary_line

set_reproducible(True)
out = Path("demo_output")
out.mkdir(exist_ok=True)

corpus = make_synthetic_corpus(500, ratio=3.5, seed=0)
print(corpus.stats.to_dict()["ratio"])

folds = stratified_kfold(corpus, k=5, seed=0)
config = toy_config()
encoder = make_encoder(config.features.encoder, seed=0)

# ### One report per model kind

reports = []
for kind in ["nb", "lr", "svm", "cnn", "lstm", "contextual", "hybrid"]:
    r = cross_validate(corpus, folds, kind, config, seed=0, encoder=encoder)
    r.save(out / f"{r.label}.json")
    print(summary_line(r))
    reports.append(r)

# per-fold numbers behind the hybrid average
hybrid = reports[-1]
for i, (m, cm) in enumerate(zip(hybrid.folds, hybrid.confusions)):
    print(i, cm.to_dict(), round(m.f1, 4))

# ### Comparison table and ROC overlay

print(format_table(reports))
print(plot_roc(reports, out / "roc"))
