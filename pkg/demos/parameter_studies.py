"""Reduced versions of the parameter sweeps, printed as tables."""

import numpy as np

from s3wkit.evaluation import eps_stability_study, evolution_study

eps = [1e-6, 1e-4, 1e-2, 0.1, 0.3]
rep = eps_stability_study(eps, n_projections=128, n=1024, rng=0, reps=10, methods=("s3w",))
print("cap size   s3w (north vs south vMF, kappa=50)")
for e in eps:
    mean, std = rep.summary(method="s3w", eps=e)
    print(f"{e:8.0e}   {mean:.4f} +- {std:.4f}")

kappas = [0.1, 1, 10, 50, 100]
rep = evolution_study("kappa", kappas, rng=0, reps=10, n=500, methods=("s3w", "ri_s3w"))
print()
print("kappa    KL(vMF||unif)   s3w     ri_s3w   (vMF against the uniform law)")
for k in kappas:
    print(f"{k:6g}   {rep.summary(method='kl', kappa=k)[0]:12.4f}   {rep.summary(method='s3w', kappa=k)[0]:.4f}"
          f"   {rep.summary(method='ri_s3w', kappa=k)[0]:.4f}")

sizes = [10, 50, 200, 1000]
rep = evolution_study("projections", sizes, rng=0, reps=30, n=300, methods=("s3w",))
print()
print("L      spread of s3w over reseeded projections")
for L in sizes:
    print(f"{L:<5}  {np.std(rep.values(method='s3w', projections=L), ddof=1):.4f}")
