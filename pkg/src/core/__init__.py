# Estimation logic: datasets, classifiers, tilt fitters, estimators, benchmarks
