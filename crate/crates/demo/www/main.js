import init, { Demo } from './pkg/sparse_selector_demo.js';

const $ = (id) => document.getElementById(id);
const CLASS_COLORS = ['#2a7', '#d33', '#36c', '#c90', '#939', '#099', '#663', '#c6c', '#777', '#a50'];
const ANCHORS = 16;

let demo = null;
let ray = null;

function params() {
  return {
    grid: $('grid').value,
    rho: Number($('rho').value),
    lambda: Number($('lambda').value),
    sigma: Number($('sigma').value),
    seed: BigInt($('seed').value || 0),
  };
}

function drawGrid() {
  const p = params();
  const [rows, cols] = demo.gridDims(p.grid);
  const canvas = $('grid-canvas');
  const scale = Math.max(1, Math.floor(500 / cols));
  canvas.width = cols * scale;
  canvas.height = rows * scale;
  const selecting = $('show-select').checked;
  const rgba = selecting
    ? demo.selectRgba(p.grid, p.rho, p.lambda, p.sigma, p.seed)
    : demo.maskRgba(p.grid);
  const off = new OffscreenCanvas(cols, rows);
  off.getContext('2d').putImageData(new ImageData(new Uint8ClampedArray(rgba), cols, rows), 0, 0);
  const ctx = canvas.getContext('2d');
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  if (ray && ray.grid === p.grid) {
    ctx.strokeStyle = '#ff0';
    ctx.strokeRect(ray.j * scale, ray.i * scale, scale, scale);
  }
  $('summary').textContent = selecting
    ? demo.selectSummary(p.grid, p.rho, p.lambda, p.sigma, p.seed)
    : `${rows} x ${cols} grid`;
}

function drawTopDown() {
  const canvas = $('topdown');
  const ctx = canvas.getContext('2d');
  const [x0, x1, y0, y1] = demo.extent();
  const sx = canvas.width / (x1 - x0);
  const sy = canvas.height / (y1 - y0);
  const px = (x, y) => [(x - x0) * sx, canvas.height - (y - y0) * sy];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = '#444';
  ctx.beginPath();
  ctx.arc(...px(0, 0), 3, 0, 2 * Math.PI);
  ctx.fill();
  const fp = demo.footprints();
  for (let b = 0; b < fp.length; b += 9) {
    ctx.fillStyle = CLASS_COLORS[fp[b + 8] % CLASS_COLORS.length];
    ctx.beginPath();
    ctx.moveTo(...px(fp[b], fp[b + 1]));
    for (let k = 1; k < 4; k++) ctx.lineTo(...px(fp[b + 2 * k], fp[b + 2 * k + 1]));
    ctx.closePath();
    ctx.fill();
  }
  if (!ray) {
    $('anchors').textContent = '';
    return;
  }
  const a = ray.anchors;
  const lines = ['camera anchors (x, y, z)'];
  ctx.strokeStyle = 'rgba(255,96,32,0.6)';
  ctx.beginPath();
  ctx.moveTo(...px(a[0], a[1]));
  for (let k = 0; k < ANCHORS; k++) ctx.lineTo(...px(a[4 * k], a[4 * k + 1]));
  ctx.stroke();
  for (let k = 0; k < 2 * ANCHORS; k++) {
    const [x, y, z, clamped] = a.slice(4 * k, 4 * k + 4);
    ctx.fillStyle = k < ANCHORS ? (clamped ? '#999' : 'rgb(255,96,32)') : 'rgb(32,96,255)';
    ctx.beginPath();
    ctx.arc(...px(x, y), k < ANCHORS ? 3 : 5, 0, 2 * Math.PI);
    ctx.fill();
    if (k === ANCHORS) lines.push('BEV anchors (x, y, z)');
    lines.push(`${x.toFixed(2)}, ${y.toFixed(2)}, ${z.toFixed(2)}${clamped ? ' (clamped)' : ''}`);
  }
  $('anchors').textContent = lines.join('\n');
}

function pickCell(ev) {
  const grid = $('grid').value;
  if (!grid.startsWith('camera:')) return;
  const [rows, cols] = demo.gridDims(grid);
  const rect = ev.target.getBoundingClientRect();
  const j = Math.floor(((ev.clientX - rect.left) / rect.width) * cols);
  const i = Math.floor(((ev.clientY - rect.top) / rect.height) * rows);
  const camera = Number(grid.slice(7));
  try {
    ray = { grid, i, j, anchors: demo.rayAnchors(camera, i, j, ANCHORS) };
  } catch (e) {
    ray = null;
    $('anchors').textContent = e.message;
  }
  drawGrid();
  drawTopDown();
}

function generate() {
  try {
    demo = new Demo(BigInt($('seed').value || 0), Number($('boxes').value), Number($('rare').value));
  } catch (e) {
    $('summary').textContent = e.message;
    return;
  }
  ray = null;
  const counts = demo.classCounts();
  $('summary').textContent = `boxes per class: ${Array.from(counts).join(', ')}`;
  drawGrid();
  drawTopDown();
}

async function main() {
  await init();
  const grid = $('grid');
  for (const name of ['bev', 'camera:0', 'camera:1', 'camera:2', 'camera:3', 'camera:4', 'camera:5']) {
    grid.add(new Option(name, name));
  }
  grid.value = 'camera:0';
  for (const id of ['rho', 'lambda', 'sigma']) {
    $(id).addEventListener('input', () => {
      $(`${id}-out`).textContent = $(id).value;
      $('show-select').checked = true;
      drawGrid();
    });
  }
  for (const id of ['grid', 'show-mask', 'show-select']) $(id).addEventListener('change', drawGrid);
  $('generate').addEventListener('click', generate);
  $('grid-canvas').addEventListener('click', pickCell);
  generate();
}

main();
