"""
Train and evaluate on the benchmark
===================================

A short semi-supervised run (5 epochs, a couple of minutes on one core)
followed by the classification and clustering report.
"""
from dataclasses import replace

from scdc import benchmark as bm
from scdc.metrics import format_table
from scdc.trainer import evaluate_model, train

exp = bm.benchmark_experiment()
data = bm.benchmark_data()
print("%d annotated, %d unannotated, %d test" % (len(data.annotated), len(data.unannotated),
                                                 len(data.test)))

result = train(data, replace(exp.train, epochs=5))
for e in result.reports:
    print("epoch %d  L_sup %.3f  L_cat %.3f  L_emb %.3f  L_pse %.3f  confident %.2f" % (
        e.epoch, e.l_sup, e.l_cat, e.l_emb, e.l_pse, e.confident_rate))

cls, clu = evaluate_model(result.model, data.test, data.class_count)
print(format_table({"benchmark": {"RAC": cls.rac, "F1S": cls.f1_macro, "AUROC": cls.auroc_macro,
                                  "NMI": clu.nmi, "CAC": clu.cac, "FMI": clu.fmi}}))
