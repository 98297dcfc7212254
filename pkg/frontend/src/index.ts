export { applyOverrides, configFromRecord, configRecord, configText,
         DEFAULT_CONFIG, parseConfigText, validateConfig } from "./config.js";
export type { TrainerConfig } from "./config.js";
export { DATASET_COLUMNS, FEATURE_COLUMNS, loadDataset, N_FEATURES,
         N_TARGETS, parseDataset, sidecarFingerprint, sidecarPath,
         TARGET_COLUMNS } from "./datafile.js";
export type { Dataset, UserSeries } from "./datafile.js";
export { buildPredictionArrays, buildTrainingArrays, fitScalers, mulberry32,
         planWindows } from "./windows.js";
export type { PredictionArrays, PredictionRowSpec, Scaler, TrainingArrays,
              UserScalers, WindowArrays, WindowPlan } from "./windows.js";
export { ARTIFACT_FORMAT, buildModel, loadArtifact, MODEL_FILE, saveArtifact,
         TRAINER_FILE, WEIGHTS_FILE } from "./model.js";
export type { ArtifactMeta, LoadedArtifact } from "./model.js";
export { fitArrays, train, trainDataset } from "./train.js";
export type { FitResult, TrainReport } from "./train.js";
export { predict, predictionCsvText, PREDICTION_HEADER, predictRows } from "./predict.js";
export type { PredictionRow, PredictOptions } from "./predict.js";
export { main } from "./cli.js";
