/*
 * Copyright 2026 The NUQLS Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef NUQLS_RUNTIME_HPP_
#define NUQLS_RUNTIME_HPP_

namespace nuqls {

// Keeps large temporary buffers on the heap instead of fresh mmap'd pages.
// Dense-matrix code allocates many short-lived megabyte buffers, and
// faulting in new pages per allocation dominates runtime on some hosts.
// Call once at program start. No-op when the allocator is not glibc.
void configure_allocator();

}  // namespace nuqls

#endif  // NUQLS_RUNTIME_HPP_
