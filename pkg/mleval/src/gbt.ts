// Gradient-boosted regression trees with fixed hyperparameters.
//
// Squared loss for regression; logistic loss with Newton leaf steps for
// binary classification; one-vs-rest for multiclass. Exact greedy splits on
// sorted feature values, so training is deterministic for a given dataset.

export interface GbtParams {
  rounds: number;
  learningRate: number;
  maxDepth: number;
  minLeaf: number;
}

export const DEFAULT_PARAMS: GbtParams = {
  rounds: 80,
  learningRate: 0.1,
  maxDepth: 3,
  minLeaf: 5,
};

interface TreeNode {
  feature: number;
  threshold: number;
  left: TreeNode | null;
  right: TreeNode | null;
  value: number; // leaf payload when left/right are null
}

function buildTree(
  x: number[][],
  gradient: number[],
  hessian: number[],
  rows: number[],
  depth: number,
  params: GbtParams
): TreeNode {
  const leafValue = () => {
    let g = 0;
    let h = 0;
    for (const r of rows) {
      g += gradient[r];
      h += hessian[r];
    }
    return { feature: -1, threshold: 0, left: null, right: null, value: g / (h + 1e-12) };
  };
  if (depth >= params.maxDepth || rows.length < 2 * params.minLeaf) {
    return leafValue();
  }

  const width = x[0].length;
  let bestGain = 1e-12;
  let bestFeature = -1;
  let bestThreshold = 0;
  let totalG = 0;
  let totalH = 0;
  for (const r of rows) {
    totalG += gradient[r];
    totalH += hessian[r];
  }
  const parentScore = (totalG * totalG) / (totalH + 1e-12);

  for (let f = 0; f < width; f++) {
    const order = [...rows].sort((a, b) => x[a][f] - x[b][f]);
    let leftG = 0;
    let leftH = 0;
    for (let i = 0; i < order.length - 1; i++) {
      const r = order[i];
      leftG += gradient[r];
      leftH += hessian[r];
      if (i + 1 < params.minLeaf || order.length - i - 1 < params.minLeaf) continue;
      const here = x[r][f];
      const next = x[order[i + 1]][f];
      if (here === next) continue;
      const rightG = totalG - leftG;
      const rightH = totalH - leftH;
      const gain =
        (leftG * leftG) / (leftH + 1e-12) +
        (rightG * rightG) / (rightH + 1e-12) -
        parentScore;
      if (gain > bestGain) {
        bestGain = gain;
        bestFeature = f;
        bestThreshold = (here + next) / 2;
      }
    }
  }
  if (bestFeature < 0) {
    return leafValue();
  }
  const leftRows = rows.filter((r) => x[r][bestFeature] <= bestThreshold);
  const rightRows = rows.filter((r) => x[r][bestFeature] > bestThreshold);
  return {
    feature: bestFeature,
    threshold: bestThreshold,
    left: buildTree(x, gradient, hessian, leftRows, depth + 1, params),
    right: buildTree(x, gradient, hessian, rightRows, depth + 1, params),
    value: 0,
  };
}

function treePredict(node: TreeNode, row: number[]): number {
  let cur = node;
  while (cur.left !== null && cur.right !== null) {
    cur = row[cur.feature] <= cur.threshold ? cur.left : cur.right;
  }
  return cur.value;
}

const sigmoid = (z: number) => 1 / (1 + Math.exp(-z));

export class GbtRegressor {
  private trees: TreeNode[] = [];
  private bias = 0;

  constructor(private params: GbtParams = DEFAULT_PARAMS) {}

  fit(x: number[][], y: number[]): this {
    const n = y.length;
    this.bias = y.reduce((a, b) => a + b, 0) / n;
    const scores = new Array(n).fill(this.bias);
    const hessian = new Array(n).fill(1);
    const rows = Array.from({ length: n }, (_, i) => i);
    for (let round = 0; round < this.params.rounds; round++) {
      const gradient = y.map((t, i) => t - scores[i]);
      const tree = buildTree(x, gradient, hessian, rows, 0, this.params);
      this.trees.push(tree);
      for (let i = 0; i < n; i++) {
        scores[i] += this.params.learningRate * treePredict(tree, x[i]);
      }
    }
    return this;
  }

  predict(row: number[]): number {
    let score = this.bias;
    for (const tree of this.trees) {
      score += this.params.learningRate * treePredict(tree, row);
    }
    return score;
  }
}

/** Binary logistic booster; multiclass wraps one per class (one-vs-rest). */
export class GbtClassifier {
  private perClass: { bias: number; trees: TreeNode[] }[] = [];
  private nClasses = 0;

  constructor(private params: GbtParams = DEFAULT_PARAMS) {}

  fit(x: number[][], y: number[], nClasses: number): this {
    this.nClasses = nClasses;
    const binaryTargets =
      nClasses === 2
        ? [y]
        : Array.from({ length: nClasses }, (_, c) => y.map((t) => (t === c ? 1 : 0)));
    for (const target of binaryTargets) {
      this.perClass.push(this.fitBinary(x, target));
    }
    return this;
  }

  private fitBinary(x: number[][], y: number[]) {
    const n = y.length;
    const pos = y.reduce((a, b) => a + b, 0);
    const prior = Math.min(Math.max(pos / n, 1e-6), 1 - 1e-6);
    const bias = Math.log(prior / (1 - prior));
    const scores = new Array(n).fill(bias);
    const rows = Array.from({ length: n }, (_, i) => i);
    const trees: TreeNode[] = [];
    const gradient = new Array(n).fill(0);
    const hessian = new Array(n).fill(0);
    for (let round = 0; round < this.params.rounds; round++) {
      for (let i = 0; i < n; i++) {
        const p = sigmoid(scores[i]);
        gradient[i] = y[i] - p;
        hessian[i] = Math.max(p * (1 - p), 1e-6);
      }
      const tree = buildTree(x, gradient, hessian, rows, 0, this.params);
      trees.push(tree);
      for (let i = 0; i < n; i++) {
        scores[i] += this.params.learningRate * treePredict(tree, x[i]);
      }
    }
    return { bias, trees };
  }

  private classScore(model: { bias: number; trees: TreeNode[] }, row: number[]): number {
    let score = model.bias;
    for (const tree of model.trees) {
      score += this.params.learningRate * treePredict(tree, row);
    }
    return score;
  }

  predict(row: number[]): number {
    if (this.nClasses === 2) {
      return sigmoid(this.classScore(this.perClass[0], row)) >= 0.5 ? 1 : 0;
    }
    let best = 0;
    let bestScore = -Infinity;
    for (let c = 0; c < this.perClass.length; c++) {
      const s = this.classScore(this.perClass[c], row);
      if (s > bestScore) {
        bestScore = s;
        best = c;
      }
    }
    return best;
  }
}
