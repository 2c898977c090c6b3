"""Quality-assessment workbench for audio-driven 3D gesture generation.

Submodules:

* core       -- domain types, dataset manifest, validation
* subjective -- rating aggregation: Z-score MOS, outlier screening, ESBA
* features   -- media frontends and the three single-modality encoders
* model      -- fusion head, assembled scorer, correlation loss
* training   -- grouped k-fold cross-validation harness
* metrics    -- SRCC / PLCC / KRCC / RMSE evaluation suite
* synth      -- deterministic synthetic dataset with planted signal
* service    -- HTTP annotation backend for the subjective experiment
* cli        -- command-line entry point wiring everything together
"""

__version__ = "0.1.0"
