"""SumOfGram regression, TU graph classification and timing benches."""
from .bench import BenchRow, bench, write_bench_csv
from .sumofgram import (AGGREGATORS, CSV_COLUMNS, ConfigError, RunRecord, SetModel, SetModelConfig,
                        SumOfGramDataset, SumOfGramGrid, TrainConfig, cell_configs, gen_sumofgram,
                        match_head_width, model_param_count, summarize, sumofgram_labels,
                        train_model, train_sumofgram, write_csv, write_manifest)
from .tu import (ClassifierRecord, GraphTrainConfig, TUParseError, kfold_indices, load_tu_dataset,
                 parity_dataset, train_graph_classifier, write_tu_dataset)
