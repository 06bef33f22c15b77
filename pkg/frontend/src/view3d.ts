/**
 * Three.js tube view with a small hand-rolled orbit camera (drag to orbit,
 * wheel to dolly).  Geometry buffers come in from the UI loop; this layer
 * only uploads them and draws.
 */

import * as THREE from "three";

import { Frame } from "./protocol.js";
import { TubeBuffers } from "./tube.js";
import { FrameRenderer } from "./ui_loop.js";

const BACKGROUND = 0xf4f5f7;
const FOV_DEGREES = 45;
const NEAR_PLANE = 0.01;
const FAR_PLANE = 500;

export class TubeView implements FrameRenderer {
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly renderer: THREE.WebGLRenderer;
  private readonly mesh: THREE.Mesh;
  private readonly geometry = new THREE.BufferGeometry();

  // orbit state: spherical angles around a fitted target
  private target = new THREE.Vector3();
  private distance = 20;
  private theta = 0.8;
  private phi = 1.1;
  private fitted = false;

  constructor(private readonly canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setClearColor(BACKGROUND);
    this.camera = new THREE.PerspectiveCamera(
      FOV_DEGREES,
      canvas.clientWidth / Math.max(1, canvas.clientHeight),
      NEAR_PLANE,
      FAR_PLANE,
    );
    const material = new THREE.MeshPhongMaterial({
      vertexColors: true,
      shininess: 28,
      specular: 0x222222,
    });
    this.mesh = new THREE.Mesh(this.geometry, material);
    this.scene.add(this.mesh);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const key = new THREE.DirectionalLight(0xffffff, 0.9);
    key.position.set(1, 1.2, 1.6);
    this.scene.add(key);
    this.bindPointer();
  }

  render(_frame: Frame, tube: TubeBuffers): void {
    this.geometry.setAttribute(
      "position",
      new THREE.BufferAttribute(tube.positions, 3),
    );
    this.geometry.setAttribute(
      "normal",
      new THREE.BufferAttribute(tube.normals, 3),
    );
    this.geometry.setAttribute(
      "color",
      new THREE.BufferAttribute(tube.colors, 3),
    );
    this.geometry.setIndex(new THREE.BufferAttribute(tube.indices, 1));
    if (!this.fitted) {
      this.fitView(tube.positions);
      this.fitted = true;
    }
    this.draw();
  }

  /** Frame the initial curve; later frames keep the user's camera. */
  private fitView(positions: Float32Array): void {
    const box = new THREE.Box3();
    const p = new THREE.Vector3();
    for (let i = 0; i < positions.length; i += 3) {
      p.set(positions[i], positions[i + 1], positions[i + 2]);
      box.expandByPoint(p);
    }
    box.getCenter(this.target);
    const size = box.getSize(new THREE.Vector3()).length();
    this.distance = Math.max(1, size * 1.2);
    this.draw();
  }

  private draw(): void {
    const sinPhi = Math.sin(this.phi);
    this.camera.position.set(
      this.target.x + this.distance * sinPhi * Math.cos(this.theta),
      this.target.y + this.distance * Math.cos(this.phi),
      this.target.z + this.distance * sinPhi * Math.sin(this.theta),
    );
    this.camera.lookAt(this.target);
    const w = this.canvas.clientWidth;
    const h = Math.max(1, this.canvas.clientHeight);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(w, h, false);
    this.renderer.render(this.scene, this.camera);
  }

  private bindPointer(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      lastX = ev.clientX;
      lastY = ev.clientY;
      this.canvas.setPointerCapture(ev.pointerId);
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      this.theta += (ev.clientX - lastX) * 0.008;
      // clamp away from the poles so lookAt keeps a well-defined up
      this.phi = Math.min(
        3.0,
        Math.max(0.15, this.phi + (ev.clientY - lastY) * 0.008),
      );
      lastX = ev.clientX;
      lastY = ev.clientY;
      this.draw();
    });
    this.canvas.addEventListener("pointerup", () => {
      dragging = false;
    });
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.distance *= Math.exp(ev.deltaY * 0.001);
      this.draw();
    });
  }
}
