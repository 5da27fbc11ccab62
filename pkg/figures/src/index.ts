export { main, parseArgs } from "./args.js";
export { aggregateMetric, finalValues, mean, sampleSd } from "./aggregate.js";
export { expandGlob, parseParticlesCsv, parseTraceCsv, readParticles, readTraces } from "./csv.js";
export { FIGURE_KINDS, renderFigure, renderToFile } from "./figures.js";
export type { FigureKind, FigureSpec } from "./figures.js";
export { renderPlot } from "./svg.js";
