/** A minimal sketch pad: freehand drawing on a canvas, exported as PNG. */

export class SketchPad {
  readonly canvas: HTMLCanvasElement;
  private readonly ctx: CanvasRenderingContext2D | null;
  private drawing = false;
  private strokes = 0;

  constructor(canvas: HTMLCanvasElement, size = 256) {
    this.canvas = canvas;
    canvas.width = size;
    canvas.height = size;
    this.ctx = canvas.getContext('2d');
    if (this.ctx) {
      this.ctx.fillStyle = '#ffffff';
      this.ctx.fillRect(0, 0, size, size);
      this.ctx.strokeStyle = '#1f2430';
      this.ctx.lineWidth = 4;
      this.ctx.lineCap = 'round';
    }
    canvas.addEventListener('pointerdown', (e) => this.start(e));
    canvas.addEventListener('pointermove', (e) => this.move(e));
    canvas.addEventListener('pointerup', () => this.end());
    canvas.addEventListener('pointerleave', () => this.end());
  }

  private position(event: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const scaleX = this.canvas.width / (rect.width || this.canvas.width);
    const scaleY = this.canvas.height / (rect.height || this.canvas.height);
    return [(event.clientX - rect.left) * scaleX, (event.clientY - rect.top) * scaleY];
  }

  private start(event: PointerEvent): void {
    this.drawing = true;
    this.strokes += 1;
    const [x, y] = this.position(event);
    this.ctx?.beginPath();
    this.ctx?.moveTo(x, y);
  }

  private move(event: PointerEvent): void {
    if (!this.drawing) return;
    const [x, y] = this.position(event);
    this.ctx?.lineTo(x, y);
    this.ctx?.stroke();
  }

  private end(): void {
    this.drawing = false;
  }

  get hasStrokes(): boolean {
    return this.strokes > 0;
  }

  clear(): void {
    this.strokes = 0;
    if (this.ctx) {
      this.ctx.fillStyle = '#ffffff';
      this.ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
      this.ctx.strokeStyle = '#1f2430';
    }
  }

  toPngBlob(): Promise<Blob> {
    return new Promise((resolve, reject) => {
      this.canvas.toBlob((blob) => {
        if (blob) {
          resolve(blob);
        } else {
          reject(new Error('canvas produced no image'));
        }
      }, 'image/png');
    });
  }
}
